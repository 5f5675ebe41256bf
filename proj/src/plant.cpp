#include "klctl/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "klctl/error.hpp"

namespace klctl {

double ExpMap::operator()(double x) const noexcept { return amplitude * std::exp(-rate * x); }

double ExpMap::derivative(double x) const noexcept {
    return -rate * amplitude * std::exp(-rate * x);
}

double ExpMap::inverse(double y) const {
    if (!(y > 0.0)) throw std::domain_error("g^-1 is only defined for positive KL");
    return -std::log(y / amplitude) / rate;
}

void ExpMap::validate() const {
    if (!std::isfinite(amplitude) || amplitude <= 0.0) {
        throw ConfigError("exp map amplitude must be positive");
    }
    if (!std::isfinite(rate) || rate <= 0.0) {
        throw ConfigError("exp map rate must be positive (g must be decreasing)");
    }
}

void PlantParams::validate() const {
    if (!std::isfinite(a) || a <= 0.0) throw ConfigError("plant a must be positive");
    g.validate();
    if (!std::isfinite(y0) || y0 < 0.0) throw ConfigError("plant y0 must be nonnegative");
    if (!std::isfinite(noise_std) || noise_std < 0.0) {
        throw ConfigError("plant noise_std must be nonnegative");
    }
}

PlantParams plant_preset(std::string_view name) {
    PlantParams p;
    if (name == "mnist") {
        p.a = 1.0 / 5000.0;
        p.g = ExpMap{26.38, 0.0476};
    } else if (name == "dsprites") {
        p.a = 1.0 / 2500.0;
        p.g = ExpMap{3.2 / 0.121, 0.121};
    } else {
        throw ConfigError("unknown plant preset '" + std::string(name) +
                          "' (expected mnist or dsprites)");
    }
    return p;
}

double preset_g_prime_min(std::string_view name) {
    if (name == "mnist") return -1.26;
    if (name == "dsprites") return -3.2;
    throw ConfigError("unknown plant preset '" + std::string(name) + "'");
}

PlantModel::PlantModel(PlantParams params, std::uint64_t rng_seed)
    : params_(params), y_(params.y0), rng_(rng_seed) {
    params_.validate();
}

double PlantModel::step(double beta) {
    if (!std::isfinite(beta)) throw std::invalid_argument("plant input beta is not finite");
    const double a = params_.a;
    y_ = y_ / (1.0 + a) + (a / (1.0 + a)) * params_.g(beta);
    double sample = y_;
    if (params_.noise_std > 0.0) sample += params_.noise_std * noise_(rng_);
    return std::max(sample, 0.0);
}

double open_loop_response(double a, double c_prime, double t) {
    if (!(a > 0.0)) throw ConfigError("open-loop response needs a > 0");
    return c_prime * -std::expm1(-a * t);
}

ExpMap fit_exp_map(std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 2) throw ConfigError("exp-map fit needs at least 2 samples");
    double mean_x = 0.0;
    double mean_ly = 0.0;
    for (const auto& [x, y] : samples) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw ConfigError("exp-map fit samples must be finite");
        }
        if (y <= 0.0) throw ConfigError("exp-map fit needs positive converged KL values");
        mean_x += x;
        mean_ly += std::log(y);
    }
    const auto n = static_cast<double>(samples.size());
    mean_x /= n;
    mean_ly /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& [x, y] : samples) {
        const double dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - mean_ly);
    }
    if (sxx <= 0.0) throw ConfigError("exp-map fit needs at least two distinct beta values");
    const double slope = sxy / sxx;
    if (!(slope < 0.0)) {
        throw NumericalError("plant not monotone decreasing: fitted KL grows with beta");
    }
    return ExpMap{std::exp(mean_ly - slope * mean_x), -slope};
}

double estimate_a(std::span<const std::pair<double, double>> trajectory, double c_prime) {
    if (!std::isfinite(c_prime) || c_prime <= 0.0) {
        throw ConfigError("final KL value c' must be positive");
    }
    const double target = kRiseFraction * c_prime;
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const auto [t, y] = trajectory[i];
        if (y < target) continue;
        double t_star = t;
        if (i > 0) {
            const auto [t0, y0] = trajectory[i - 1];
            if (y > y0) t_star = t0 + (t - t0) * (target - y0) / (y - y0);
        }
        if (!(t_star > 0.0)) {
            throw NumericalError("insufficient rise: crossing at t <= 0");
        }
        return 1.0 / t_star;
    }
    throw NumericalError("insufficient rise: trajectory never reaches 63.2% of final KL");
}

}  // namespace klctl
