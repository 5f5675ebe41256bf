#pragma once

#include <cstdint>
#include <string_view>

namespace klctl {

enum class AnnealMode { hybrid, step_only };

[[nodiscard]] std::string_view to_string(AnnealMode mode) noexcept;
/// Parses "hybrid" / "step_only"; throws ConfigError otherwise.
[[nodiscard]] AnnealMode parse_anneal_mode(std::string_view text);

/// Annealed KL set point C(t).
///
/// Each period of `plateau_len + ramp_len` steps holds the current level for
/// `plateau_len` steps and then rises linearly by `step_size` over `ramp_len`
/// steps. In step-only mode the ramp is collapsed into a jump at the period
/// boundary. The level never exceeds `c_final`.
struct AnnealSchedule {
    double c0 = 0.5;
    double c_final = 20.0;
    double step_size = 0.15;
    std::int64_t plateau_len = 5000;
    std::int64_t ramp_len = 1000;
    AnnealMode mode = AnnealMode::hybrid;

    [[nodiscard]] std::int64_t period() const noexcept { return plateau_len + ramp_len; }

    /// Throws ConfigError if the parameters are inconsistent.
    void validate() const;

    /// First step from which C(t) == c_final for good.
    [[nodiscard]] std::int64_t saturation_step() const;
};

[[nodiscard]] double setpoint_at(const AnnealSchedule& sched, std::int64_t t);

/// Set-point guideline: target at or below the KL an unweighted VAE converges
/// to. @p fraction in (0, 1] scales the result (1 = equal).
[[nodiscard]] double recommend_setpoint(double vae_converged_kl, double fraction = 1.0);

}  // namespace klctl
