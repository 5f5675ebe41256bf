#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "klctl/error.hpp"
#include "klctl/toyvae/dataset.hpp"
#include "klctl/toyvae/mig.hpp"
#include "klctl/toyvae/model.hpp"
#include "klctl/toyvae/trainer.hpp"

using namespace klctl;
using namespace klctl::toyvae;

namespace {

Eigen::MatrixXd random_binary(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(0.3);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = b(rng) ? 1.0 : 0.0;
    return m;
}

ToyTrainConfig tiny_train() {
    ToyTrainConfig cfg;
    cfg.nx = 4;
    cfg.ny = 3;
    cfg.ns = 2;
    cfg.image_size = 8;
    cfg.shape = {64, 16, 3};
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.schedule = AnnealSchedule{0.5, 3.0, 0.5, 20, 10, AnnealMode::hybrid};
    cfg.steps = 300;
    cfg.eval_every = 100;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("factor dataset cardinality, uniqueness and pixel counts") {
    const auto ds = make_factor_dataset(8, 8, 3, 16);
    CHECK(ds.size() == 192);
    CHECK(ds.images.rows() == 192);
    std::set<std::array<int, 3>> seen(ds.factors.begin(), ds.factors.end());
    CHECK(seen.size() == 192);
    std::set<std::vector<double>> distinct;
    for (Eigen::Index i = 0; i < ds.images.rows(); ++i) {
        const Eigen::VectorXd row = ds.images.row(i);
        distinct.insert(std::vector<double>(row.data(), row.data() + row.size()));
        const int side = square_side(ds.factors[static_cast<std::size_t>(i)][2]);
        CHECK(row.sum() == side * side);
        CHECK(((row.array() == 0.0) || (row.array() == 1.0)).all());
    }
    CHECK(distinct.size() == 192);
    CHECK_THROWS_AS((void)make_factor_dataset(20, 2, 3, 16), ConfigError);
    CHECK_THROWS_AS((void)make_factor_dataset(2, 2, 10, 16), ConfigError);
}

TEST_CASE("closed-form KL examples") {
    const VaeShape shape{4, 3, 2};
    ToyVae zero(shape, 1);
    for (auto i : {w_mu, b_mu, w_logvar, b_logvar}) zero.params().t[i].setZero();
    const Eigen::MatrixXd x = random_binary(5, 4, 2);
    std::mt19937_64 rng(3);
    const auto t = zero.elbo_terms(x, 1.0, rng);
    CHECK(t.kl_total == 0.0);

    ToyVae one({4, 3, 1}, 1);
    for (auto i : {w_mu, b_mu, w_logvar, b_logvar}) one.params().t[i].setZero();
    one.params().t[b_mu](0, 0) = 1.0;
    const auto u = one.elbo_terms(x, 2.0, rng);
    CHECK(u.kl_total == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(u.loss == doctest::Approx(u.recon_nll + 2.0 * 0.5).epsilon(1e-15));
}

TEST_CASE("KL nonnegative and decomposes over dims") {
    ToyVae m({16, 8, 5}, 4);
    const Eigen::MatrixXd x = random_binary(10, 16, 5);
    std::mt19937_64 rng(6);
    const auto t = m.elbo_terms(x, 1.0, rng);
    double sum = 0.0;
    for (double k : t.kl_per_dim) {
        CHECK(k >= 0.0);
        sum += k;
    }
    CHECK(std::abs(sum - t.kl_total) < 1e-6);
}

TEST_CASE("analytic gradients match central finite differences") {
    const VaeShape shape{7, 5, 3};
    ToyVae model(shape, 11);
    // Nonzero biases so every parameter's gradient is exercised.
    std::mt19937_64 rng(12);
    for (auto i : {b_enc, b_mu, b_logvar, b_dec1, b_dec2}) {
        model.params().t[i] = 0.1 * standard_normal(1, model.params().t[i].cols(), rng);
    }
    const Eigen::MatrixXd x = random_binary(4, 7, 13);
    const Eigen::MatrixXd eps = standard_normal(4, 3, rng);
    const double beta = 0.7;
    ParamSet grad = ParamSet::zeros_like(model.params());
    (void)model.elbo_terms(x, beta, eps, &grad);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        auto& w = model.params().t[i];
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            const double orig = w.data()[k];
            w.data()[k] = orig + h;
            const double up = model.elbo_terms(x, beta, eps).loss;
            w.data()[k] = orig - h;
            const double down = model.elbo_terms(x, beta, eps).loss;
            w.data()[k] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = grad.t[i].data()[k];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
        }
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("log-variance clamp zeroes the gradient outside the range") {
    ToyVae model({4, 3, 2}, 2);
    model.params().t[b_logvar].setConstant(50.0);
    const Eigen::MatrixXd x = random_binary(3, 4, 1);
    std::mt19937_64 rng(1);
    ParamSet grad = ParamSet::zeros_like(model.params());
    const auto t = model.elbo_terms(x, 1.0, rng, &grad);
    CHECK(std::isfinite(t.loss));
    CHECK(grad.t[b_logvar].cwiseAbs().maxCoeff() == 0.0);
    // KL uses the clamped value: ½(e^10 - 10 - 1) per dim.
    CHECK(t.kl_per_dim[0] == doctest::Approx(0.5 * (std::exp(10.0) - 11.0 + 0.0)).epsilon(1e-3));
}

TEST_CASE("Adam first step moves each weight by lr against the gradient sign") {
    ToyVae model({4, 3, 2}, 2);
    ParamSet g = ParamSet::zeros_like(model.params());
    g.t[w_enc].setConstant(0.3);
    g.t[b_dec2].setConstant(-2.0);
    const ParamSet before = model.params();
    Adam opt(model.params(), 0.01);
    opt.step(model.params(), g);
    CHECK((model.params().t[w_enc] - before.t[w_enc]).array().abs().maxCoeff() == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(((model.params().t[w_enc] - before.t[w_enc]).array() < 0.0).all());
    CHECK(((model.params().t[b_dec2] - before.t[b_dec2]).array() > 0.0).all());
    CHECK(model.params().t[w_mu] == before.t[w_mu]);
}

TEST_CASE("checkpoint round trip is bit exact") {
    ToyVae model({9, 4, 2}, 8);
    const auto path = std::filesystem::temp_directory_path() / "klctl_test.ckpt";
    save_checkpoint(model, path);
    const ToyVae back = load_checkpoint(path);
    CHECK(back.shape().input_dim == 9);
    for (std::size_t i = 0; i < kNumTensors; ++i) CHECK(back.params().t[i] == model.params().t[i]);
    CHECK(checkpoint_bytes(back) == checkpoint_bytes(model));
    std::filesystem::remove(path);
}

TEST_CASE("MIG examples") {
    const auto ds = make_factor_dataset(5, 4, 3, 12);
    std::vector<std::vector<int>> factors(3, std::vector<int>(ds.size()));
    Eigen::MatrixXd exact(static_cast<Eigen::Index>(ds.size()), 3);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            factors[k][i] = ds.factors[i][k];
            exact(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ds.factors[i][k];
        }
    }
    CHECK(mig_score(exact, factors) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::MatrixXd dup = exact;
    dup.col(1) = dup.col(0);
    // x is captured twice (gap 0) and y by nobody.
    CHECK(mig_score(dup, factors) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Eigen::MatrixXd constant = Eigen::MatrixXd::Zero(exact.rows(), 2);
    CHECK(mig_score(constant, factors) == 0.0);

    // Independent latents on a large sample.
    const int n = 20000;
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> f(0, 9);
    std::vector<std::vector<int>> big(2, std::vector<int>(n));
    for (auto& col : big) for (auto& v : col) v = f(rng);
    const Eigen::MatrixXd noise = standard_normal(n, 4, rng);
    CHECK(mig_score(noise, big) < 0.01);
    CHECK_THROWS((void)mig_score(exact, factors, 1));
}

TEST_CASE("equal-frequency bins keep ties together") {
    Eigen::VectorXd v(6);
    v << 1.0, 1.0, 1.0, 1.0, 2.0, 3.0;
    const auto b = equal_frequency_bins(v, 3);
    CHECK(b[0] == b[1]);
    CHECK(b[1] == b[2]);
    CHECK(b[2] == b[3]);
    CHECK(b[4] != b[0]);
    CHECK(discrete_entropy(std::vector<int>{0, 0, 1, 1}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("trainer: determinism, logged beta and variants") {
    const ToyTrainConfig cfg = tiny_train();
    const auto a = train_with_controller(cfg);
    const auto b = train_with_controller(cfg);
    REQUIRE(a.log.rows.size() == 300);
    CHECK(train_log_csv(a.log) == train_log_csv(b.log));
    CHECK(checkpoint_bytes(a.model) == checkpoint_bytes(b.model));
    CHECK(a.log.evals.size() == 3);
    CHECK(a.log.mig >= 0.0);
    CHECK(a.log.mig <= 1.0);

    // Replaying the controller on the logged feedback reproduces the logged β.
    auto ctl = ControllerState::incremental(cfg.gains, cfg.beta0, cfg.beta_min);
    for (const auto& r : a.log.rows) {
        CHECK(r.beta == ctl.beta);
        double sum = 0.0;
        for (double k : r.kl_per_dim) sum += k;
        CHECK(std::abs(sum - r.kl_total) < 1e-6);
        pi_step(ctl, r.setpoint - r.kl_smoothed);
    }

    ToyTrainConfig t1 = cfg;
    t1.window_t = 1;
    ToyTrainConfig ns = cfg;
    ns.variant = Variant::no_smoothing;
    CHECK(train_log_csv(train_with_controller(t1).log) == train_log_csv(train_with_controller(ns).log));

    ToyTrainConfig pos = cfg;
    pos.variant = Variant::no_init_positional;
    CHECK(train_with_controller(pos).log.rows[0].beta == doctest::Approx(cfg.gains.kp * 0.5));
}

TEST_CASE("trainer: fixed beta is plain VAE training") {
    ToyTrainConfig cfg = tiny_train();
    cfg.fixed_beta = 1.0;
    cfg.steps = 50;
    const auto r = train_with_controller(cfg);
    for (const auto& row : r.log.rows) CHECK(row.beta == 1.0);

    ToyTrainConfig bad = cfg;
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS((void)train_with_controller(bad), ConfigError);
}

TEST_CASE("trainer: divergence is reported with the step") {
    ToyTrainConfig cfg = tiny_train();
    cfg.fixed_beta = 1.0;
    cfg.learning_rate = 1e200;
    cfg.steps = 50;
    try {
        (void)train_with_controller(cfg);
        FAIL("expected divergence");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("dimwise trace") {
    TrainLog log;
    for (int t = 0; t < 100; ++t) {
        TrainRow r;
        r.step = t;
        r.kl_per_dim = {0.0, t >= 30 ? 1.0 : 0.0, t >= 60 ? 0.5 : 0.0};
        log.rows.push_back(r);
    }
    const auto act = dimwise_kl_trace(log, 0.1, 10);
    CHECK_FALSE(act[0].has_value());
    REQUIRE(act[1].has_value());
    CHECK(*act[1] == 31);  // mean over 10 rows first exceeds 0.1 with two active rows
    REQUIRE(act[2].has_value());
    CHECK(*act[2] == 62);
    const auto none = dimwise_kl_trace(log, 5.0, 10);
    for (const auto& a : none) CHECK_FALSE(a.has_value());
    TrainLog zeros;
    zeros.rows.assign(10, TrainRow{0, 0, 0, 0, 0, 0, {0.0, 0.0}});
    for (const auto& a : dimwise_kl_trace(zeros)) CHECK_FALSE(a.has_value());
}
