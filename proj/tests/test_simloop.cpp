#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "klctl/error.hpp"
#include "klctl/simloop.hpp"
#include "klctl/stability.hpp"

using namespace klctl;

namespace {

LoopConfig small_loop() {
    LoopConfig cfg;
    cfg.plant.a = 0.02;
    cfg.plant.g = ExpMap{26.38, 0.0476};
    cfg.schedule = AnnealSchedule{0.5, 4.0, 0.5, 60, 40, AnnealMode::hybrid};
    cfg.gains = {0.2, 0.1};
    cfg.beta0 = 80.0;
    cfg.steps = 3000;
    return cfg;
}

}  // namespace

TEST_CASE("closed-loop equilibrium is constant") {
    LoopConfig cfg;
    cfg.plant = plant_preset("dsprites");
    const double c = 12.0;
    cfg.plant.y0 = c;
    cfg.schedule = AnnealSchedule{c, c, 0.15, 5000, 1000, AnnealMode::hybrid};
    cfg.beta0 = cfg.plant.g.inverse(c);
    cfg.steps = 5000;
    const Trajectory tr = run_closed_loop(cfg);
    for (const auto& r : tr.rows) {
        CHECK(r.setpoint == c);
        CHECK(r.kl_smoothed == doctest::Approx(c).epsilon(1e-12));
        CHECK(r.beta == doctest::Approx(cfg.beta0).epsilon(1e-12));
    }
    const auto m = tracking_metrics(tr);
    CHECK(m.max_overshoot == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.settle_step == 0);
    CHECK(m.steady_err == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("trajectory shape and reproducibility") {
    LoopConfig cfg = small_loop();
    cfg.plant.noise_std = 0.05;
    cfg.seed = 9;
    cfg.beta_min = 0.05;
    const Trajectory a = run_closed_loop(cfg);
    const Trajectory b = run_closed_loop(cfg);
    REQUIRE(a.rows.size() == static_cast<std::size_t>(cfg.steps));
    CHECK(a.config_digest == b.config_digest);
    CHECK(a.config_digest.size() == 16);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].step == static_cast<std::int64_t>(i));
        CHECK(a.rows[i].kl_raw >= 0.0);
        CHECK(a.rows[i].kl_smoothed >= 0.0);
        CHECK(a.rows[i].beta >= cfg.beta_min);
        CHECK(a.rows[i].kl_raw == b.rows[i].kl_raw);
        CHECK(a.rows[i].beta == b.rows[i].beta);
    }
    cfg.seed = 10;
    const Trajectory c = run_closed_loop(cfg);
    CHECK(c.rows[100].kl_raw != a.rows[100].kl_raw);
}

TEST_CASE("full variant with window 1 equals no_smoothing") {
    LoopConfig cfg = small_loop();
    cfg.plant.noise_std = 0.1;
    cfg.window_t = 1;
    const Trajectory full = run_closed_loop(cfg);
    cfg.window_t = 5;
    cfg.variant = Variant::no_smoothing;
    const Trajectory raw = run_closed_loop(cfg);
    for (std::size_t i = 0; i < full.rows.size(); ++i) {
        CHECK(full.rows[i].kl_smoothed == raw.rows[i].kl_smoothed);
        CHECK(full.rows[i].beta == raw.rows[i].beta);
    }
}

TEST_CASE("positional variant starts from the positional law") {
    LoopConfig cfg = small_loop();
    cfg.variant = Variant::no_init_positional;
    const Trajectory tr = run_closed_loop(cfg);
    CHECK(tr.rows[0].beta == doctest::Approx(cfg.gains.kp * 0.5));
    cfg.variant = Variant::step_only_anneal;
    const Trajectory st = run_closed_loop(cfg);
    CHECK(st.rows[60].setpoint == 0.5);
    CHECK(st.rows[100].setpoint == 1.0);
}

TEST_CASE("stable gains converge once the schedule saturates") {
    struct Case { double kp, ki, a; };
    for (const Case& k : {Case{0.2, 0.1, 0.02}, Case{0.05, 0.05, 0.05}, Case{1.0, 0.3, 0.01}}) {
        LoopConfig cfg = small_loop();
        cfg.gains = {k.kp, k.ki};
        cfg.plant.a = k.a;
        const double g_eq = cfg.plant.g.derivative(cfg.plant.g.inverse(cfg.schedule.c_final));
        const auto rep = check_stability(k.kp, k.ki, k.a, g_eq);
        REQUIRE(rep.stable());
        // 20 plant time constants, or 20 closed-loop decay times if the loop is slower.
        const double horizon = std::max(20.0 / k.a, 20.0 / (1.0 - rep.spectral_radius));
        cfg.steps = cfg.schedule.saturation_step() + static_cast<std::int64_t>(horizon);
        const auto m = tracking_metrics(run_closed_loop(cfg));
        CHECK(m.steady_err < 1e-3 * cfg.schedule.c_final);
        CHECK(m.settled);
    }
}

TEST_CASE("gains beyond the gain-sum bound never settle") {
    LoopConfig cfg = small_loop();
    const double c = cfg.schedule.c_final;
    const double g_eq = cfg.plant.g.derivative(cfg.plant.g.inverse(c));
    const double bound = -4.0 * (1.0 + cfg.plant.a) / (cfg.plant.a * g_eq);
    cfg.gains = {1.6 * bound, 0.4 * bound};  // kp + ki = 2 x bound
    const auto r = check_stability(cfg.gains.kp, cfg.gains.ki, cfg.plant.a, g_eq);
    CHECK_FALSE(r.stable());
    const auto m = tracking_metrics(run_closed_loop(cfg));
    CHECK_FALSE(m.settled);
    CHECK(m.settle_step == cfg.steps);
}

TEST_CASE("tracking_metrics on synthetic series") {
    std::vector<double> c(100, 5.0);
    std::vector<double> osc(100);
    for (std::size_t t = 0; t < osc.size(); ++t) osc[t] = 5.0 + (t % 2 ? 1.0 : -1.0);
    const auto m = tracking_metrics(c, osc, 5.0);
    CHECK_FALSE(m.settled);
    CHECK(m.settle_step == 100);
    CHECK(m.max_overshoot == doctest::Approx(1.0));
    CHECK(m.steady_err == doctest::Approx(1.0));

    std::vector<double> step(100, 5.0);
    step[10] = 6.0;
    const auto s = tracking_metrics(c, step, 5.0);
    CHECK(s.settled);
    CHECK(s.settle_step == 11);
    CHECK_THROWS((void)tracking_metrics(std::vector<double>{}, std::vector<double>{}, 1.0));
}

TEST_CASE("hybrid annealing overshoots no more than step-only (paired)") {
    LoopConfig cfg;
    cfg.plant = plant_preset("dsprites");
    cfg.plant.noise_std = 0.02;
    cfg.schedule.c_final = 3.0;
    cfg.steps = 120000;
    cfg.seed = 1;
    const auto hybrid = tracking_metrics(run_closed_loop(cfg));
    cfg.variant = Variant::step_only_anneal;
    const auto step = tracking_metrics(run_closed_loop(cfg));
    CHECK(hybrid.max_overshoot <= step.max_overshoot);
}

TEST_CASE("config validation") {
    LoopConfig cfg;
    cfg.schedule.c_final = 100.0;  // above g(0)
    CHECK_THROWS_AS((void)run_closed_loop(cfg), ConfigError);
    cfg = LoopConfig{};
    cfg.window_t = 0;
    CHECK_THROWS_AS((void)run_closed_loop(cfg), ConfigError);
    cfg = LoopConfig{};
    cfg.beta0 = -1.0;
    CHECK_THROWS_AS((void)run_closed_loop(cfg), ConfigError);
    CHECK(parse_variant("step-anneal") == Variant::step_only_anneal);
    CHECK(parse_variant("no-smooth") == Variant::no_smoothing);
    CHECK(parse_variant("positional") == Variant::no_init_positional);
    CHECK_THROWS_AS((void)parse_variant("bogus"), ConfigError);
}
