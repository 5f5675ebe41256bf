#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "klctl/error.hpp"
#include "klctl/schedule.hpp"

using namespace klctl;

TEST_CASE("default hybrid schedule examples") {
    const AnnealSchedule s;  // 0.5 -> 20, 0.15 per 5000 + 1000
    CHECK(s.period() == 6000);
    CHECK(setpoint_at(s, 0) == 0.5);
    CHECK(setpoint_at(s, 4999) == 0.5);
    CHECK(setpoint_at(s, 5500) == doctest::Approx(0.575).epsilon(1e-14));
    CHECK(setpoint_at(s, 6000) == doctest::Approx(0.65).epsilon(1e-14));
    CHECK(setpoint_at(s, 10'000'000) == 20.0);
}

TEST_CASE("monotone, bounded, continuous in hybrid mode") {
    AnnealSchedule s;
    s.c_final = 3.0;
    const std::int64_t end = s.saturation_step() + 2 * s.period();
    double prev = setpoint_at(s, 0);
    for (std::int64_t t = 1; t < end; ++t) {
        const double c = setpoint_at(s, t);
        CHECK(c >= prev);
        CHECK(c <= s.c_final);
        CHECK(c >= s.c0);
        CHECK(c - prev <= s.step_size / static_cast<double>(s.ramp_len) + 1e-12);
        prev = c;
    }
}

TEST_CASE("step_only jumps by step_size at period boundaries") {
    AnnealSchedule s;
    s.c_final = 3.0;
    s.mode = AnnealMode::step_only;
    double max_jump = 0.0;
    const std::int64_t sat = s.saturation_step();
    for (std::int64_t t = 1; t < sat; ++t) {
        const double jump = setpoint_at(s, t) - setpoint_at(s, t - 1);
        if (t % s.period() == 0) {
            CHECK(jump == doctest::Approx(s.step_size).epsilon(1e-9));
        } else {
            CHECK(jump == 0.0);
        }
        max_jump = std::max(max_jump, jump);
    }
    CHECK(max_jump == doctest::Approx(s.step_size).epsilon(1e-9));
}

TEST_CASE("saturation step is exact and permanent") {
    for (auto mode : {AnnealMode::hybrid, AnnealMode::step_only}) {
        AnnealSchedule s;
        s.c_final = 2.0;
        s.mode = mode;
        const std::int64_t t0 = s.saturation_step();
        CHECK(setpoint_at(s, t0 - 1) < s.c_final);
        for (std::int64_t t = t0; t < t0 + 3 * s.period(); t += 7) CHECK(setpoint_at(s, t) == s.c_final);
    }
}

TEST_CASE("final increment is truncated at c_final") {
    AnnealSchedule s{0.0, 1.0, 0.3, 10, 10, AnnealMode::hybrid};
    for (std::int64_t t = 0; t < 200; ++t) CHECK(setpoint_at(s, t) <= 1.0);
    CHECK(setpoint_at(s, 79) == 1.0);
}

TEST_CASE("schedule validation") {
    AnnealSchedule s;
    s.ramp_len = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = AnnealSchedule{};
    s.c_final = 0.1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = AnnealSchedule{};
    s.step_size = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(parse_anneal_mode("step_only") == AnnealMode::step_only);
    CHECK_THROWS_AS((void)parse_anneal_mode("ramp"), ConfigError);
}

TEST_CASE("recommend_setpoint") {
    CHECK(recommend_setpoint(20.0) == 20.0);
    CHECK(recommend_setpoint(26.0) == 26.0);
    CHECK(recommend_setpoint(26.0, 0.5) == 13.0);
    CHECK(recommend_setpoint(7.7) <= 7.7);
    CHECK_THROWS_AS((void)recommend_setpoint(0.0), ConfigError);
    CHECK_THROWS_AS((void)recommend_setpoint(-1.0), ConfigError);
    CHECK_THROWS_AS((void)recommend_setpoint(5.0, 1.5), ConfigError);
}
