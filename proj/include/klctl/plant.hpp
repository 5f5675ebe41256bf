#pragma once

/**
 * @file plant.hpp
 * @brief First-order surrogate of the KL response to β, and its identification.
 *
 * The training process is modelled by the discrete recurrence (sampling period 1)
 *
 *   y(t) = y(t-1)/(1+a) + a/(1+a) · g(β(t)),     g(x) = A·exp(-k·x)
 *
 * where g maps a constant β to the KL the model converges to and a is the
 * inverse rise time.
 */

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace klctl {

/// g(x) = amplitude · exp(-rate · x), strictly positive and decreasing.
struct ExpMap {
    double amplitude = 1.0;  ///< A, nats
    double rate = 1.0;       ///< k, per unit β

    [[nodiscard]] double operator()(double x) const noexcept;
    [[nodiscard]] double derivative(double x) const noexcept;
    /// g⁻¹(y) for y in (0, amplitude]; throws std::domain_error outside (0, ∞).
    [[nodiscard]] double inverse(double y) const;

    void validate() const;
};

/// Parameters needed to build a PlantModel. Kept separate from the running
/// plant so configurations stay plain values.
struct PlantParams {
    double a = 1.0 / 2500.0;
    ExpMap g{3.2 / 0.121, 0.121};
    double y0 = 0.0;
    double noise_std = 0.0;

    void validate() const;
};

/// Named presets: "mnist" (a = 1/5000, g = 26.38·exp(-0.0476x)) and "dsprites"
/// (a = 1/2500, g = (3.2/0.121)·exp(-0.121x)). Throws ConfigError otherwise.
[[nodiscard]] PlantParams plant_preset(std::string_view name);

/// Conservative bound on g' (negative) the preset was characterised with: -1.26 / -3.2.
[[nodiscard]] double preset_g_prime_min(std::string_view name);

class PlantModel {
public:
    PlantModel(PlantParams params, std::uint64_t rng_seed);

    /// Advance one step under weight @p beta. Returns the measured sample
    /// (noisy, clipped at 0); the internal state keeps the noiseless value.
    double step(double beta);

    [[nodiscard]] double state() const noexcept { return y_; }
    [[nodiscard]] const PlantParams& params() const noexcept { return params_; }

private:
    PlantParams params_;
    double y_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_{0.0, 1.0};
};

inline double plant_step(PlantModel& p, double beta) { return p.step(beta); }

/// Continuous open-loop reference C'·(1 - exp(-a t)).
[[nodiscard]] double open_loop_response(double a, double c_prime, double t);

/// Fits g by log-linear least squares on (β, converged KL) samples.
/// Throws ConfigError on bad input and NumericalError if the fitted map is
/// not monotone decreasing.
[[nodiscard]] ExpMap fit_exp_map(std::span<const std::pair<double, double>> samples);

/// Estimates a = 1/t* from the first 63.2% crossing of @p c_prime (linear
/// interpolation between bracketing samples). Samples must be ordered by t.
/// Throws NumericalError("insufficient rise") if no crossing exists.
[[nodiscard]] double estimate_a(std::span<const std::pair<double, double>> trajectory,
                                double c_prime);

/// Fraction of the open-loop rise at which the time constant is read off.
inline constexpr double kRiseFraction = 0.632;

}  // namespace klctl
