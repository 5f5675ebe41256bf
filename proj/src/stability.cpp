#include "klctl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "klctl/error.hpp"

namespace klctl {

namespace {

using cplx = std::complex<double>;

void require_hypotheses(double a, double g_prime) {
    if (!std::isfinite(a) || a <= 0.0) {
        throw AssumptionError("stability assumptions unmet: plant parameter a must be > 0");
    }
    if (!std::isfinite(g_prime) || g_prime >= 0.0) {
        throw AssumptionError(
            "stability assumptions unmet: g'(x*) must be < 0 (KL decreasing in beta)");
    }
}

std::array<double, 5> k_entries(double kp, double ki, double a, double g_prime) {
    return {1.0, 0.25 * kp + ki, -0.25 * kp, a * g_prime / (1.0 + a), 1.0 / (1.0 + a)};
}

Matrix3 jacobian_from_k(const std::array<double, 5>& k) {
    return Matrix3{{{k[0], k[1], k[2]}, {k[3], k[4], 0.0}, {0.0, 1.0, 0.0}}};
}

double horner(double c2, double c1, double c0, double x) { return ((x + c2) * x + c1) * x + c0; }

double newton_polish(double c2, double c1, double c0, double x) {
    double best = x;
    double best_f = std::abs(horner(c2, c1, c0, x));
    for (int it = 0; it < 60 && best_f > 0.0; ++it) {
        const double f = horner(c2, c1, c0, x);
        const double df = (3.0 * x + 2.0 * c2) * x + c1;
        if (df == 0.0) break;
        const double next = x - f / df;
        if (!std::isfinite(next)) break;
        const double fn = std::abs(horner(c2, c1, c0, next));
        x = next;
        if (fn < best_f) {
            best = next;
            best_f = fn;
        } else if (it > 8) {
            break;
        }
    }
    return best;
}

// Real root of largest magnitude, from the closed form and then polished.
double dominant_real_root(double c2, double c1, double c0) {
    const double shift = c2 / 3.0;
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    const double disc = 0.25 * q * q + p * p * p / 27.0;

    std::array<double, 3> cand{};
    std::size_t n = 0;
    if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        const double u = std::cbrt(-0.5 * q - std::copysign(sq, q));
        const double t = (u != 0.0) ? u - p / (3.0 * u) : 0.0;
        cand[n++] = t - shift;
    } else if (p == 0.0) {
        cand[n++] = std::cbrt(-q) - shift;
    } else {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int kk = 0; kk < 3; ++kk) {
            cand[n++] = m * std::cos(theta - 2.0 * std::numbers::pi * kk / 3.0) - shift;
        }
    }
    double best = cand[0];
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(cand[i]) > std::abs(best)) best = cand[i];
    }
    return newton_polish(c2, c1, c0, best);
}

}  // namespace

std::string_view condition_id(Condition c) noexcept {
    switch (c) {
        case Condition::gain_sum: return "i";
        case Condition::quadratic: return "ii";
        case Condition::ki_positive:
        case Condition::kp_positive: return "iii";
    }
    return "?";
}

std::string_view condition_text(Condition c) noexcept {
    switch (c) {
        case Condition::gain_sum: return "Kp+Ki<-4(1+a)/(a*g')";
        case Condition::quadratic: return "-0.5*Kp^2*a*g'^2-2[Kp-4Ki(1+a)]g'+8(1+a)>0";
        case Condition::ki_positive: return "Ki>0";
        case Condition::kp_positive: return "Kp>0";
    }
    return "?";
}

LinearizedSystem linearize(double kp, double ki, double a, double g_prime_eq) {
    if (!std::isfinite(kp) || kp <= 0.0) {
        throw AssumptionError("stability assumptions unmet: Kp must be > 0");
    }
    if (!std::isfinite(ki) || ki <= 0.0) {
        throw AssumptionError("stability assumptions unmet: Ki must be > 0");
    }
    require_hypotheses(a, g_prime_eq);
    LinearizedSystem sys;
    sys.kp = kp;
    sys.ki = ki;
    sys.a = a;
    sys.g_prime_eq = g_prime_eq;
    sys.k = k_entries(kp, ki, a, g_prime_eq);
    sys.jacobian = jacobian_from_k(sys.k);
    return sys;
}

Cubic characteristic_coeffs(const LinearizedSystem& sys) {
    const auto& k = sys.k;
    return {1.0, -(k[0] + k[4]), k[0] * k[4] - k[1] * k[3], -k[2] * k[3]};
}

Cubic routh_coeffs_from_k(const std::array<double, 5>& k) {
    const double k1 = k[0], k2 = k[1], k3 = k[2], k4 = k[3], k5 = k[4];
    return {
        k1 + k5 + k1 * k5 - k2 * k4 + k3 * k4 + 1.0,
        k1 + k5 - k1 * k5 + k2 * k4 - 3.0 * k3 * k4 + 3.0,
        -k1 - k5 - k1 * k5 + k2 * k4 + 3.0 * k3 * k4 + 3.0,
        -k1 - k5 + k1 * k5 - k2 * k4 - k3 * k4 + 1.0,
    };
}

Cubic routh_coeffs_closed_form(double kp, double ki, double a, double g_prime) {
    const double ag = a * g_prime;
    const double d = 1.0 + a;
    return {
        (4.0 * a + 8.0 - (kp + 2.0 * ki) * ag) / (2.0 * d),
        (4.0 * d + (kp + ki) * ag) / d,
        (2.0 * a + ag * (ki - 0.5 * kp)) / d,
        -ki * ag / d,
    };
}

double routh_determinant_closed_form(double kp, double ki, double a, double g_prime) {
    const double ag = a * g_prime;
    const double d = 1.0 + a;
    // Expanding b1·b2 - b3·b0 from the closed forms gives 4·Ki(1+a) in the
    // middle term; the printed derivation carries 8·Ki(1+a), which does not
    // match its own coefficient formulas.
    return (-0.5 * kp * kp * ag * ag - 2.0 * ag * (kp - 4.0 * ki * d) + 8.0 * a * d) / (d * d);
}

Cubic routh_coeffs(const LinearizedSystem& sys) {
    const Cubic closed = routh_coeffs_closed_form(sys.kp, sys.ki, sys.a, sys.g_prime_eq);
    const Cubic generic = routh_coeffs_from_k(sys.k);
    const double scale = 8.0 + 4.0 * (std::abs(sys.k[1] * sys.k[3]) + std::abs(sys.k[2] * sys.k[3]));
    for (std::size_t i = 0; i < 4; ++i) {
        if (std::abs(closed[i] - generic[i]) > 1e-12 * scale) {
            throw NumericalError("bilinear coefficient forms disagree at b" +
                                 std::to_string(3 - i));
        }
    }
    return closed;
}

bool routh_hurwitz_stable(const Cubic& b, double determinant) {
    return b[0] > 0.0 && b[1] > 0.0 && b[2] > 0.0 && b[3] > 0.0 && determinant > 0.0;
}

std::array<std::complex<double>, 3> solve_monic_cubic(double c2, double c1, double c0) {
    const double r = dominant_real_root(c2, c1, c0);
    // Deflate: λ³ + c2λ² + c1λ + c0 = (λ - r)(λ² + q1 λ + q0).
    const double q1 = c2 + r;
    const double q0 = (r != 0.0) ? -c0 / r : c1 + r * q1;
    const double disc = q1 * q1 - 4.0 * q0;
    std::array<cplx, 3> roots{cplx(r, 0.0), {}, {}};
    if (disc < 0.0) {
        const double re = -0.5 * q1;
        const double im = 0.5 * std::sqrt(-disc);
        roots[1] = cplx(re, im);
        roots[2] = cplx(re, -im);
    } else {
        const double s = -0.5 * (q1 + std::copysign(std::sqrt(disc), q1));
        const double x1 = s;
        const double x2 = (s != 0.0) ? q0 / s : 0.0;
        roots[1] = cplx(newton_polish(c2, c1, c0, x1), 0.0);
        roots[2] = cplx(newton_polish(c2, c1, c0, x2), 0.0);
    }
    return roots;
}

std::array<std::complex<double>, 3> eigenvalues3(const Matrix3& m) {
    const double trace = m[0][0] + m[1][1] + m[2][2];
    const double minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) +
                          (m[0][0] * m[2][2] - m[0][2] * m[2][0]) +
                          (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    return solve_monic_cubic(-trace, minors, -det);
}

StabilityReport check_stability(double kp, double ki, double a, double g_prime_eq) {
    require_hypotheses(a, g_prime_eq);
    if (!std::isfinite(kp) || !std::isfinite(ki)) {
        throw std::invalid_argument("controller gains must be finite");
    }
    StabilityReport rep;
    const auto k = k_entries(kp, ki, a, g_prime_eq);

    rep.b_coeffs = routh_coeffs_closed_form(kp, ki, a, g_prime_eq);
    rep.routh_stable =
        routh_hurwitz_stable(rep.b_coeffs, routh_determinant_closed_form(kp, ki, a, g_prime_eq));

    rep.eigenvalues = eigenvalues3(jacobian_from_k(k));
    rep.spectral_radius = 0.0;
    for (const auto& l : rep.eigenvalues) rep.spectral_radius = std::max(rep.spectral_radius, std::abs(l));
    rep.eig_stable = rep.spectral_radius < 1.0;
    rep.marginal = std::abs(rep.spectral_radius - 1.0) < kMarginalBand;
    rep.verdicts_agree = rep.routh_stable == rep.eig_stable;

    const double d = 1.0 + a;
    if (!(kp + ki < -4.0 * d / (a * g_prime_eq))) rep.violated_conditions.push_back(Condition::gain_sum);
    const double quad = -0.5 * kp * kp * a * g_prime_eq * g_prime_eq -
                        2.0 * (kp - 4.0 * ki * d) * g_prime_eq + 8.0 * d;
    if (!(quad > 0.0)) rep.violated_conditions.push_back(Condition::quadratic);
    if (!(ki > 0.0)) rep.violated_conditions.push_back(Condition::ki_positive);
    if (!(kp > 0.0)) rep.violated_conditions.push_back(Condition::kp_positive);
    return rep;
}

std::vector<RegionCell> stability_region(double a, double g_prime_eq, Range kp_range,
                                         Range ki_range, std::size_t kp_steps,
                                         std::size_t ki_steps) {
    require_hypotheses(a, g_prime_eq);
    if (kp_steps < 2 || ki_steps < 2) {
        throw ConfigError("stability region needs at least 2 grid points per axis");
    }
    for (const Range& r : {kp_range, ki_range}) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.hi < r.lo) {
            throw ConfigError("stability region ranges must be finite with lo <= hi");
        }
    }
    std::vector<RegionCell> cells;
    cells.reserve(kp_steps * ki_steps);
    for (std::size_t i = 0; i < kp_steps; ++i) {
        const double kp = kp_range.lo + (kp_range.hi - kp_range.lo) * static_cast<double>(i) /
                                            static_cast<double>(kp_steps - 1);
        for (std::size_t j = 0; j < ki_steps; ++j) {
            const double ki = ki_range.lo + (ki_range.hi - ki_range.lo) *
                                                static_cast<double>(j) /
                                                static_cast<double>(ki_steps - 1);
            const StabilityReport rep = check_stability(kp, ki, a, g_prime_eq);
            cells.push_back(RegionCell{kp, ki, rep.routh_stable, rep.eig_stable,
                                       rep.spectral_radius, rep.marginal,
                                       rep.violated_conditions});
        }
    }
    return cells;
}

}  // namespace klctl
