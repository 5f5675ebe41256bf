#include "klctl/toyvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "klctl/error.hpp"
#include "klctl/io.hpp"
#include "klctl/toyvae/mig.hpp"

namespace klctl::toyvae {

void ToyTrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (window_t < 1) throw ConfigError("window_t must be >= 1");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    if (mig_bins < 2) throw ConfigError("mig_bins must be >= 2");
    if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) || gains.kp < 0.0 || gains.ki < 0.0) {
        throw ConfigError("gains must be finite and nonnegative");
    }
    if (!std::isfinite(beta0) || !std::isfinite(beta_min) || beta0 < beta_min) {
        throw ConfigError("beta0 must be finite and not below beta_min");
    }
    if (fixed_beta && !(std::isfinite(*fixed_beta) && *fixed_beta >= 0.0)) {
        throw ConfigError("fixed_beta must be finite and nonnegative");
    }
    if (shape.input_dim != image_size * image_size) {
        throw ConfigError("VAE input_dim must equal image_size^2");
    }
    schedule.validate();
}

namespace {

// Reserved stream offsets so batch order, sampling noise and evaluation
// noise never share a generator with weight initialisation.
constexpr std::uint64_t kBatchStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kEvalStream = 0xbf58476d1ce4e5b9ULL;

class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
    }

    Eigen::MatrixXd next(const Eigen::MatrixXd& images, int batch) {
        Eigen::MatrixXd out(batch, images.cols());
        for (int r = 0; r < batch; ++r) {
            if (pos_ == order_.size()) {
                std::shuffle(order_.begin(), order_.end(), rng_);
                pos_ = 0;
            }
            out.row(r) = images.row(static_cast<Eigen::Index>(order_[pos_++]));
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::mt19937_64 rng_;
};

EvalPoint evaluate(const ToyVae& model, const FactorDataset& data, const Eigen::MatrixXd& eval_eps,
                   int bins, std::int64_t step) {
    const ElboTerms terms = model.elbo_terms(data.images, 1.0, eval_eps);
    return {step, mig_score(model, data, bins), terms.recon_nll, terms.kl_total};
}

}  // namespace

TrainResult train_with_controller(const ToyTrainConfig& cfg) {
    return train_with_controller(make_factor_dataset(cfg.nx, cfg.ny, cfg.ns, cfg.image_size), cfg);
}

TrainResult train_with_controller(const FactorDataset& data, const ToyTrainConfig& cfg) {
    cfg.validate();
    if (data.pixels() != cfg.shape.input_dim) {
        throw ConfigError("dataset image size does not match the VAE input");
    }

    AnnealSchedule sched = cfg.schedule;
    if (cfg.variant == Variant::step_only_anneal) sched.mode = AnnealMode::step_only;
    const bool positional = cfg.variant == Variant::no_init_positional;
    const auto window =
        static_cast<std::size_t>(cfg.variant == Variant::no_smoothing ? 1 : cfg.window_t);

    ToyVae model(cfg.shape, cfg.seed);
    Adam opt(model.params(), cfg.learning_rate);
    BatchSampler sampler(data.size(), cfg.seed ^ kBatchStream);
    std::mt19937_64 noise_rng(cfg.seed + kBatchStream);
    std::mt19937_64 eval_rng(cfg.seed ^ kEvalStream);
    const Eigen::MatrixXd eval_eps = standard_normal(
        static_cast<Eigen::Index>(data.size()), cfg.shape.latent_dim, eval_rng);

    MovingAverage ma(window);
    ControllerState ctl = positional ? ControllerState::positional(cfg.gains, cfg.beta_min)
                                     : ControllerState::incremental(cfg.gains, cfg.beta0, cfg.beta_min);

    TrainLog log;
    log.rows.reserve(static_cast<std::size_t>(cfg.steps));
    ParamSet grad = ParamSet::zeros_like(model.params());
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
        const double c = setpoint_at(sched, t);
        const double beta = cfg.fixed_beta ? *cfg.fixed_beta : ctl.beta;
        const Eigen::MatrixXd batch = sampler.next(data.images, cfg.batch_size);
        ElboTerms terms;
        try {
            terms = model.elbo_terms(batch, beta, noise_rng, &grad);
        } catch (const NumericalError& err) {
            throw NumericalError("training diverged at step " + std::to_string(t) + ": " + err.what());
        }
        if (!std::isfinite(terms.loss) || !grad.all_finite()) {
            throw NumericalError("training diverged at step " + std::to_string(t) +
                                 ": non-finite loss or gradient");
        }
        opt.step(model.params(), grad);
        if (!model.params().all_finite()) {
            throw NumericalError("training diverged at step " + std::to_string(t) +
                                 ": non-finite parameters after update");
        }

        const double ys = ma.push(std::max(terms.kl_total, 0.0));
        if (!cfg.fixed_beta) {
            const double e = c - ys;
            if (positional) {
                positional_pi_step(ctl, e);
            } else {
                pi_step(ctl, e);
            }
        }
        log.rows.push_back({t, c, terms.kl_total, ys, beta, terms.recon_nll, terms.kl_per_dim});

        const std::int64_t done = t + 1;
        if (cfg.eval_every > 0 && (done % cfg.eval_every == 0 || done == cfg.steps)) {
            log.evals.push_back(evaluate(model, data, eval_eps, cfg.mig_bins, done));
        }
    }
    const EvalPoint last = (!log.evals.empty() && log.evals.back().step == cfg.steps)
                               ? log.evals.back()
                               : evaluate(model, data, eval_eps, cfg.mig_bins, cfg.steps);
    log.mig = last.mig;
    log.recon_final = last.recon_nll;
    return {std::move(model), std::move(log)};
}

std::vector<std::optional<std::int64_t>> dimwise_kl_trace(const TrainLog& log, double threshold,
                                                           std::size_t window) {
    if (window == 0) window = 1;
    const std::size_t dims = log.rows.empty() ? 0 : log.rows.front().kl_per_dim.size();
    std::vector<std::optional<std::int64_t>> out(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < log.rows.size(); ++i) {
            sum += log.rows[i].kl_per_dim[j];
            if (i >= window) sum -= log.rows[i - window].kl_per_dim[j];
            const auto n = static_cast<double>(std::min(i + 1, window));
            if (sum / n > threshold) {
                out[j] = log.rows[i].step;
                break;
            }
        }
    }
    return out;
}

TrackingMetrics tracking_metrics(const TrainLog& log, double c_final) {
    std::vector<double> c;
    std::vector<double> ys;
    c.reserve(log.rows.size());
    ys.reserve(log.rows.size());
    for (const auto& r : log.rows) {
        c.push_back(r.setpoint);
        ys.push_back(r.kl_smoothed);
    }
    return klctl::tracking_metrics(c, ys, c_final);
}

std::string train_log_csv(const TrainLog& log) {
    std::string out = "step,setpoint,kl_total,kl_smoothed,beta,recon_loss";
    const std::size_t dims = log.rows.empty() ? 0 : log.rows.front().kl_per_dim.size();
    for (std::size_t j = 0; j < dims; ++j) out += ",kl_dim_" + std::to_string(j);
    out += '\n';
    for (const auto& r : log.rows) {
        out += std::to_string(r.step) + ',' + format_double(r.setpoint) + ',' +
               format_double(r.kl_total) + ',' + format_double(r.kl_smoothed) + ',' +
               format_double(r.beta) + ',' + format_double(r.recon_loss);
        for (double v : r.kl_per_dim) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace klctl::toyvae
