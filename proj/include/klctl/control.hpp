#pragma once

/**
 * @file control.hpp
 * @brief Nonlinear PI control of the KL weight β(t).
 *
 * The incremental controller updates
 *
 *   β(t) = β(t-1) + Kp [σ(-e(t)) - σ(-e(t-1))] - Ki e(t)
 *
 * with e(t) = C - y(t) (set point minus smoothed KL). The integral increment is
 * dropped while β(t-1) sits below the floor (anti-windup), and β(t) is clamped
 * to the floor afterwards. The positional variant
 *
 *   β(t) = Kp σ(-e(t)) - Ki Σ_{j<=t} e(j)
 *
 * is kept for ablation runs.
 */

#include <cstddef>
#include <vector>

namespace klctl {

/// Logistic sigmoid 1/(1+exp(-u)), overflow-safe for large |u|.
[[nodiscard]] double sigmoid(double u) noexcept;

struct Gains {
    double kp = 0.01;
    double ki = 0.005;
};

struct ControllerState {
    Gains gains;
    double beta = 150.0;
    double prev_error = 0.0;
    double beta_min = 0.0;
    double err_sum = 0.0;  ///< Σ e(j); positional variant only

    /// State for the incremental controller, started at a (large) β(0).
    [[nodiscard]] static ControllerState incremental(Gains gains, double beta0,
                                                     double beta_min = 0.0);

    /// State for the positional controller: no large initialisation, β(0) is
    /// the positional law evaluated at zero error and empty error sum.
    [[nodiscard]] static ControllerState positional(Gains gains, double beta_min = 0.0);
};

/// One incremental PI update. Returns the new β and writes it into @p state.
/// Throws std::invalid_argument on a non-finite error.
double pi_step(ControllerState& state, double error);

/// One positional PI update (ablation variant).
double positional_pi_step(ControllerState& state, double error);

/// Weighted moving average over the last T KL samples.
///
/// weights[i] multiplies the sample taken i steps ago (i = 0 is the newest).
/// Until the window is full the output is the plain mean of what is available.
class MovingAverage {
public:
    /// Equal weights 1/T.
    explicit MovingAverage(std::size_t window);
    /// Explicit weights; must be nonnegative and sum to 1.
    explicit MovingAverage(std::vector<double> weights);

    /// Push one KL sample (nonnegative, finite) and return the smoothed value.
    double push(double y_kl);

    [[nodiscard]] std::size_t window() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t filled() const noexcept { return count_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

private:
    std::vector<double> weights_;
    std::vector<double> ring_;
    std::size_t head_ = 0;  // slot of the newest sample
    std::size_t count_ = 0;
};

/// Free-function form of MovingAverage::push.
inline double smooth(MovingAverage& ma, double y_kl) { return ma.push(y_kl); }

}  // namespace klctl
