#pragma once

/**
 * @file stability.hpp
 * @brief Local stability of the PI-controlled first-order KL loop.
 *
 * With state x = (β(t), y(t-1), y(t-2)) the closed loop linearised at
 * (g⁻¹(C), C, C) has Jacobian
 *
 *       | K1  K2  K3 |     K1 = 1,              K2 = Kp/4 + Ki,   K3 = -Kp/4
 *   A = | K4  K5  0  |     K4 = a·g'/(1+a),     K5 = 1/(1+a)
 *       | 0   1   0  |
 *
 * Two verdicts are produced. The algebraic one maps the characteristic cubic
 * through ξ = (λ-1)/(λ+1) and applies Routh–Hurwitz to the resulting
 * b3ξ³ + b2ξ² + b1ξ + b0. The numeric one computes the eigenvalues of A
 * and compares the spectral radius with 1.
 */

#include <array>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace klctl {

using Matrix3 = std::array<std::array<double, 3>, 3>;

struct LinearizedSystem {
    double kp = 0.0;
    double ki = 0.0;
    double a = 0.0;
    double g_prime_eq = 0.0;
    std::array<double, 5> k{};  ///< K1..K5
    Matrix3 jacobian{};
};

/// Coefficients of a polynomial in descending powers: {c3, c2, c1, c0}.
using Cubic = std::array<double, 4>;

/// Conditions of the simplified stability theorem.
enum class Condition {
    gain_sum,   ///< (i)   Kp + Ki < -4(1+a)/(a g')
    quadratic,  ///< (ii)  -0.5 Kp² a g'² - 2[Kp - 4Ki(1+a)] g' + 8(1+a) > 0 (= (1+a)² det / a)
    ki_positive,  ///< (iii) Ki > 0
    kp_positive,  ///< (iii) Kp > 0
};

/// Short identifier used in files: "i", "ii", "iii".
[[nodiscard]] std::string_view condition_id(Condition c) noexcept;
/// Human-readable inequality, e.g. "Ki>0".
[[nodiscard]] std::string_view condition_text(Condition c) noexcept;

struct StabilityReport {
    Cubic b_coeffs{};  ///< {b3, b2, b1, b0}
    bool routh_stable = false;
    std::array<std::complex<double>, 3> eigenvalues{};
    double spectral_radius = 0.0;
    bool eig_stable = false;
    bool verdicts_agree = false;
    bool marginal = false;  ///< |ρ - 1| < kMarginalBand; linearisation cannot decide
    std::vector<Condition> violated_conditions;

    /// True when Routh, eigenvalues and the theorem conditions all say stable.
    [[nodiscard]] bool stable() const noexcept {
        return routh_stable && eig_stable && violated_conditions.empty();
    }
};

inline constexpr double kMarginalBand = 1e-6;

/// Builds K1..K5 and the Jacobian. Requires kp, ki, a > 0 and g' < 0; throws
/// AssumptionError naming the violated assumption otherwise.
[[nodiscard]] LinearizedSystem linearize(double kp, double ki, double a, double g_prime_eq);

/// Monic characteristic polynomial det(λI - A) = λ³ - (K1+K5)λ² + (K1K5 - K2K4)λ - K3K4.
[[nodiscard]] Cubic characteristic_coeffs(const LinearizedSystem& sys);

/// Bilinear-transformed coefficients from the K entries (generic form).
[[nodiscard]] Cubic routh_coeffs_from_k(const std::array<double, 5>& k);

/// Bilinear-transformed coefficients with the K entries substituted in closed form.
/// This is the numerically preferred form (no cancellation of O(1) terms).
[[nodiscard]] Cubic routh_coeffs_closed_form(double kp, double ki, double a, double g_prime);

/// b1·b2 - b3·b0 in closed form.
[[nodiscard]] double routh_determinant_closed_form(double kp, double ki, double a,
                                                   double g_prime);

/// Closed-form coefficients; throws NumericalError if the generic K form
/// disagrees beyond rounding.
[[nodiscard]] Cubic routh_coeffs(const LinearizedSystem& sys);

/// Full Routh–Hurwitz test for a cubic with b3 > 0.
[[nodiscard]] bool routh_hurwitz_stable(const Cubic& b, double determinant);

/// Roots of λ³ + c2 λ² + c1 λ + c0 (Cardano / trigonometric start, Newton polish,
/// deflation for complex pairs).
[[nodiscard]] std::array<std::complex<double>, 3> solve_monic_cubic(double c2, double c1,
                                                                    double c0);

/// Eigenvalues of a 3×3 matrix via its characteristic polynomial expanded from
/// the matrix entries (trace, principal minors, determinant).
[[nodiscard]] std::array<std::complex<double>, 3> eigenvalues3(const Matrix3& m);

/// Both verdicts plus the theorem conditions. Requires a > 0 and g' < 0
/// (throws AssumptionError); gains may be any finite values.
[[nodiscard]] StabilityReport check_stability(double kp, double ki, double a, double g_prime_eq);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct RegionCell {
    double kp = 0.0;
    double ki = 0.0;
    bool routh_stable = false;
    bool eig_stable = false;
    double spectral_radius = 0.0;
    bool marginal = false;
    std::vector<Condition> violated;
};

/// Evaluates check_stability on an inclusive, evenly spaced grid, kp-major.
[[nodiscard]] std::vector<RegionCell> stability_region(double a, double g_prime_eq,
                                                       Range kp_range, Range ki_range,
                                                       std::size_t kp_steps,
                                                       std::size_t ki_steps);

}  // namespace klctl
