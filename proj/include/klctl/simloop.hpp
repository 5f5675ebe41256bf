#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "klctl/control.hpp"
#include "klctl/plant.hpp"
#include "klctl/schedule.hpp"

namespace klctl {

/// Ablation switches. `full` is the complete method; the others each remove
/// one ingredient: positional PI without large β(0), step-only annealing, and
/// raw (unsmoothed) KL feedback.
enum class Variant { full, no_init_positional, step_only_anneal, no_smoothing };

[[nodiscard]] std::string_view to_string(Variant v) noexcept;
/// Accepts the enum spelling and the CLI aliases (positional, step-anneal, no-smooth).
[[nodiscard]] Variant parse_variant(std::string_view text);

struct LoopConfig {
    AnnealSchedule schedule;
    Gains gains;
    double beta0 = 150.0;
    double beta_min = 0.0;
    std::int64_t window_t = 5;
    PlantParams plant;
    std::int64_t steps = 200000;
    Variant variant = Variant::full;
    std::uint64_t seed = 0;

    /// Throws ConfigError on inconsistent settings (including c_final > g(0)).
    void validate() const;
};

struct TrajectoryRow {
    std::int64_t step = 0;
    double setpoint = 0.0;
    double kl_raw = 0.0;
    double kl_smoothed = 0.0;
    double beta = 0.0;  ///< β applied during this step
};

struct Trajectory {
    LoopConfig config;
    std::string config_digest;
    std::vector<TrajectoryRow> rows;
};

[[nodiscard]] Trajectory run_closed_loop(const LoopConfig& cfg);

struct TrackingMetrics {
    double max_overshoot = 0.0;
    std::int64_t settle_step = 0;
    bool settled = true;  ///< false: settle_step is the row-count sentinel
    double steady_err = 0.0;
};

/// Band used for settling: fraction of c_final.
inline constexpr double kSettleBand = 0.02;

/// Overshoot, 2%-band settling and steady error over the final 5% of rows.
[[nodiscard]] TrackingMetrics tracking_metrics(const Trajectory& traj);

/// Same metrics computed from raw series; @p c_final sets the settling band.
[[nodiscard]] TrackingMetrics tracking_metrics(const std::vector<double>& setpoint,
                                               const std::vector<double>& kl_smoothed,
                                               double c_final);

}  // namespace klctl
