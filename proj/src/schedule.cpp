#include "klctl/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "klctl/error.hpp"

namespace klctl {

std::string_view to_string(AnnealMode mode) noexcept {
    return mode == AnnealMode::hybrid ? "hybrid" : "step_only";
}

AnnealMode parse_anneal_mode(std::string_view text) {
    if (text == "hybrid") return AnnealMode::hybrid;
    if (text == "step_only") return AnnealMode::step_only;
    throw ConfigError("unknown anneal mode '" + std::string(text) +
                      "' (expected hybrid or step_only)");
}

void AnnealSchedule::validate() const {
    if (!std::isfinite(c0) || !std::isfinite(c_final) || !std::isfinite(step_size)) {
        throw ConfigError("schedule values must be finite");
    }
    if (c0 < 0.0) throw ConfigError("schedule c0 must be nonnegative");
    if (c_final < c0) throw ConfigError("schedule c_final must be >= c0");
    if (step_size <= 0.0) throw ConfigError("schedule step_size must be positive");
    if (plateau_len <= 0 || ramp_len <= 0) {
        throw ConfigError("schedule plateau_len and ramp_len must be positive");
    }
}

double setpoint_at(const AnnealSchedule& s, std::int64_t t) {
    if (t < 0) t = 0;
    const std::int64_t period = s.period();
    const std::int64_t k = t / period;
    const std::int64_t phase = t % period;
    const double base = std::min(s.c0 + static_cast<double>(k) * s.step_size, s.c_final);
    if (s.mode == AnnealMode::step_only || phase < s.plateau_len) return base;
    const double frac =
        static_cast<double>(phase - s.plateau_len) / static_cast<double>(s.ramp_len);
    return std::min(base + s.step_size * frac, s.c_final);
}

std::int64_t AnnealSchedule::saturation_step() const {
    validate();
    if (c0 >= c_final) return 0;
    auto n = static_cast<std::int64_t>(std::ceil((c_final - c0) / step_size));
    while (c0 + static_cast<double>(n) * step_size < c_final) ++n;
    while (n > 1 && c0 + static_cast<double>(n - 1) * step_size >= c_final) --n;
    if (mode == AnnealMode::step_only) return n * period();
    // Hybrid: the level is reached somewhere on the last ramp.
    std::int64_t t = (n - 1) * period() + plateau_len;
    while (setpoint_at(*this, t) < c_final) ++t;
    return t;
}

double recommend_setpoint(double vae_converged_kl, double fraction) {
    if (!std::isfinite(vae_converged_kl) || vae_converged_kl <= 0.0) {
        throw ConfigError("converged VAE KL must be positive");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("set-point fraction must lie in (0, 1]");
    }
    return vae_converged_kl * fraction;
}

}  // namespace klctl
