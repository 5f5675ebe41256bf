#include "klctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace klctl {

namespace {

void require_finite_error(double error) {
    if (!std::isfinite(error)) {
        throw std::invalid_argument("controller error input is not finite: " +
                                    std::to_string(error));
    }
}

void require_gains(const Gains& g) {
    if (!std::isfinite(g.kp) || !std::isfinite(g.ki) || g.kp < 0.0 || g.ki < 0.0) {
        throw std::invalid_argument("controller gains must be finite and nonnegative");
    }
}

}  // namespace

double sigmoid(double u) noexcept {
    if (u > 500.0) return 1.0;
    if (u < -500.0) return 0.0;
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

ControllerState ControllerState::incremental(Gains gains, double beta0, double beta_min) {
    require_gains(gains);
    if (!std::isfinite(beta0) || !std::isfinite(beta_min) || beta0 < beta_min) {
        throw std::invalid_argument("beta0 must be finite and not below beta_min");
    }
    ControllerState s;
    s.gains = gains;
    s.beta = beta0;
    s.beta_min = beta_min;
    return s;
}

ControllerState ControllerState::positional(Gains gains, double beta_min) {
    require_gains(gains);
    if (!std::isfinite(beta_min)) throw std::invalid_argument("beta_min must be finite");
    ControllerState s;
    s.gains = gains;
    s.beta_min = beta_min;
    s.beta = std::max(gains.kp * sigmoid(0.0), beta_min);
    return s;
}

double pi_step(ControllerState& state, double error) {
    require_finite_error(error);
    const double dp =
        state.gains.kp * (sigmoid(-error) - sigmoid(-state.prev_error));
    double di = -state.gains.ki * error;
    if (state.beta < state.beta_min) di = 0.0;  // wind up
    double beta = state.beta + (dp + di);
    if (beta < state.beta_min) beta = state.beta_min;
    state.beta = beta;
    state.prev_error = error;
    return beta;
}

double positional_pi_step(ControllerState& state, double error) {
    require_finite_error(error);
    state.err_sum += error;
    double beta = state.gains.kp * sigmoid(-error) - state.gains.ki * state.err_sum;
    if (!std::isfinite(beta)) {
        throw std::invalid_argument("positional controller produced a non-finite beta");
    }
    if (beta < state.beta_min) beta = state.beta_min;
    state.beta = beta;
    state.prev_error = error;
    return beta;
}

MovingAverage::MovingAverage(std::size_t window) {
    if (window == 0) throw std::invalid_argument("moving-average window must be >= 1");
    weights_.assign(window, 1.0 / static_cast<double>(window));
    ring_.assign(window, 0.0);
}

MovingAverage::MovingAverage(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw std::invalid_argument("moving-average window must be >= 1");
    for (double w : weights_) {
        if (!std::isfinite(w) || w < 0.0) {
            throw std::invalid_argument("moving-average weights must be finite and nonnegative");
        }
    }
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("moving-average weights must sum to 1");
    }
    ring_.assign(weights_.size(), 0.0);
}

double MovingAverage::push(double y_kl) {
    if (!std::isfinite(y_kl) || y_kl < 0.0) {
        throw std::invalid_argument("KL sample must be finite and nonnegative: " +
                                    std::to_string(y_kl));
    }
    const std::size_t n = ring_.size();
    head_ = (count_ == 0) ? 0 : (head_ + 1) % n;
    ring_[head_] = y_kl;
    if (count_ < n) ++count_;

    double acc = 0.0;
    if (count_ < n) {
        // Warm-up: equal-weight mean, oldest to newest.
        for (std::size_t i = count_; i-- > 0;) acc += ring_[(head_ + n - i) % n];
        return acc / static_cast<double>(count_);
    }
    for (std::size_t i = n; i-- > 0;) acc += weights_[i] * ring_[(head_ + n - i) % n];
    return acc;
}

}  // namespace klctl
