#include "klctl/simloop.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "klctl/config.hpp"
#include "klctl/error.hpp"

namespace klctl {

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_init_positional: return "no_init_positional";
        case Variant::step_only_anneal: return "step_only_anneal";
        case Variant::no_smoothing: return "no_smoothing";
    }
    return "full";
}

Variant parse_variant(std::string_view text) {
    if (text == "full") return Variant::full;
    if (text == "no_init_positional" || text == "positional") return Variant::no_init_positional;
    if (text == "step_only_anneal" || text == "step-anneal") return Variant::step_only_anneal;
    if (text == "no_smoothing" || text == "no-smooth") return Variant::no_smoothing;
    throw ConfigError("unknown variant '" + std::string(text) +
                      "' (expected full, positional, step-anneal or no-smooth)");
}

void LoopConfig::validate() const {
    schedule.validate();
    plant.validate();
    if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) || gains.kp < 0.0 || gains.ki < 0.0) {
        throw ConfigError("gains must be finite and nonnegative");
    }
    if (!std::isfinite(beta0) || !std::isfinite(beta_min)) {
        throw ConfigError("beta0 and beta_min must be finite");
    }
    if (beta0 < beta_min) throw ConfigError("beta0 must not be below beta_min");
    if (window_t < 1) throw ConfigError("window_t must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (schedule.c_final > plant.g(0.0)) {
        throw ConfigError("schedule c_final exceeds g(0): the plant cannot reach the target");
    }
}

Trajectory run_closed_loop(const LoopConfig& cfg) {
    cfg.validate();
    Trajectory traj;
    traj.config = cfg;
    traj.config_digest = config_digest(cfg);

    AnnealSchedule sched = cfg.schedule;
    if (cfg.variant == Variant::step_only_anneal) sched.mode = AnnealMode::step_only;
    const bool positional = cfg.variant == Variant::no_init_positional;
    const auto window =
        static_cast<std::size_t>(cfg.variant == Variant::no_smoothing ? 1 : cfg.window_t);

    PlantModel plant(cfg.plant, cfg.seed);
    MovingAverage ma(window);
    ControllerState ctl = positional ? ControllerState::positional(cfg.gains, cfg.beta_min)
                                     : ControllerState::incremental(cfg.gains, cfg.beta0, cfg.beta_min);

    traj.rows.reserve(static_cast<std::size_t>(cfg.steps));
    for (std::int64_t t = 0; t < cfg.steps; ++t) {
        const double c = setpoint_at(sched, t);
        const double beta = ctl.beta;
        const double y = plant.step(beta);
        const double ys = ma.push(y);
        const double e = c - ys;
        if (positional) {
            positional_pi_step(ctl, e);
        } else {
            pi_step(ctl, e);
        }
        traj.rows.push_back({t, c, y, ys, beta});
    }
    return traj;
}

TrackingMetrics tracking_metrics(const std::vector<double>& setpoint,
                                 const std::vector<double>& kl_smoothed, double c_final) {
    if (setpoint.empty() || setpoint.size() != kl_smoothed.size()) {
        throw std::invalid_argument("tracking metrics need equal-length, nonempty series");
    }
    const std::size_t n = setpoint.size();
    TrackingMetrics m;
    const double band = kSettleBand * c_final;
    std::size_t last_out = n;  // n means "never out of band"
    for (std::size_t t = 0; t < n; ++t) {
        const double d = kl_smoothed[t] - setpoint[t];
        m.max_overshoot = std::max(m.max_overshoot, d);
        if (std::abs(d) > band) last_out = t;
    }
    if (last_out == n) {
        m.settle_step = 0;
    } else if (last_out + 1 >= n) {
        m.settle_step = static_cast<std::int64_t>(n);
        m.settled = false;
    } else {
        m.settle_step = static_cast<std::int64_t>(last_out + 1);
    }
    const std::size_t tail =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
    double acc = 0.0;
    for (std::size_t t = n - tail; t < n; ++t) acc += std::abs(setpoint[t] - kl_smoothed[t]);
    m.steady_err = acc / static_cast<double>(tail);
    return m;
}

TrackingMetrics tracking_metrics(const Trajectory& traj) {
    std::vector<double> c;
    std::vector<double> ys;
    c.reserve(traj.rows.size());
    ys.reserve(traj.rows.size());
    for (const auto& r : traj.rows) {
        c.push_back(r.setpoint);
        ys.push_back(r.kl_smoothed);
    }
    return tracking_metrics(c, ys, traj.config.schedule.c_final);
}

}  // namespace klctl
