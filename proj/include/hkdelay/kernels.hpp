#pragma once

// Scalar ingredients of the delayed opinion model: the influence function psi,
// the delay profile tau(t), the memory weight alpha(s), and the integrals
// derived from them.
//
// The concrete families are a closed set chosen for this library; each has a
// closed-form integral. A composite Gauss-Legendre routine is kept for
// cross-checks and for callers that want the quadrature route.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace hkd {

enum class KernelFamily { constant, power_law, exponential };

/// Non-increasing positive influence function with psi(0) = 1.
///   constant:     psi(r) = 1
///   power_law:    psi(r) = (1 + r^2)^(-exponent)
///   exponential:  psi(r) = exp(-rate * r)
class InfluenceKernel {
public:
    static InfluenceKernel constant();
    static InfluenceKernel power_law(double exponent);
    static InfluenceKernel exponential(double rate);

    KernelFamily family() const noexcept { return family_; }
    /// exponent for power_law, rate for exponential, 0 for constant.
    double parameter() const noexcept { return param_; }
    /// Global Lipschitz constant of psi on [0, inf), derived analytically.
    double lipschitz_bound() const noexcept { return lipschitz_; }

    /// psi(r); throws DomainError for r < 0 or NaN.
    double operator()(double r) const;

    /// psi as a function of the squared distance. No domain check; used by
    /// the pairwise kernels where r2 >= 0 by construction.
    double from_squared(double r2) const noexcept;

private:
    InfluenceKernel(KernelFamily f, double p, double l) : family_(f), param_(p), lipschitz_(l) {}
    KernelFamily family_;
    double param_;
    double lipschitz_;
};

double psi_eval(const InfluenceKernel& kernel, double r);

enum class DelayFamily { constant, linear_decreasing };

/// Non-increasing delay bounded below by tau_star.
///   constant:           tau(t) = tau0
///   linear_decreasing:  tau(t) = max(tau_inf, tau0 - slope * t)
class DelayProfile {
public:
    static DelayProfile constant(double tau);
    static DelayProfile linear_decreasing(double tau0, double tau_inf, double slope);

    DelayFamily family() const noexcept { return family_; }
    double tau_zero() const noexcept { return tau0_; }
    double tau_star() const noexcept { return tau_inf_; }
    double slope() const noexcept { return slope_; }

    double operator()(double t) const noexcept;

    /// Same family with tau(0) replaced; for linear profiles the floor is
    /// clamped so it never exceeds the new tau(0).
    DelayProfile with_tau_zero(double tau0) const;

private:
    DelayProfile(DelayFamily f, double t0, double tinf, double s)
        : family_(f), tau0_(t0), tau_inf_(tinf), slope_(s) {}
    DelayFamily family_;
    double tau0_;
    double tau_inf_;
    double slope_;
};

enum class WeightFamily { constant, exponential, polynomial };

/// Memory weight alpha on [0, tau(0)].
///   constant:     alpha(s) = c
///   exponential:  alpha(s) = exp(-rate * s)
///   polynomial:   alpha(s) = sum_k coeffs[k] * s^k
class MemoryWeight {
public:
    static MemoryWeight constant(double c);
    static MemoryWeight exponential(double rate);
    static MemoryWeight polynomial(std::vector<double> coeffs);

    WeightFamily family() const noexcept { return family_; }
    const std::vector<double>& coefficients() const noexcept { return coeffs_; }

    double operator()(double s) const noexcept;

    /// Closed-form integral of alpha over [0, upper].
    double integral(double upper) const noexcept;

private:
    MemoryWeight(WeightFamily f, std::vector<double> c) : family_(f), coeffs_(std::move(c)) {}
    WeightFamily family_;
    // constant: {c}; exponential: {rate}; polynomial: coefficients
    std::vector<double> coeffs_;
};

/// Message used whenever a configuration asks for a point-mass memory weight.
inline constexpr std::string_view kDiracWeightMessage =
    "alpha family 'dirac' is not supported: a point-mass weight at tau(t) is a pointwise "
    "delay, not an integrable memory kernel; use the discrete-delay model instead";

/// Checks that alpha >= 0 on [0, tau(0)] (dense sampling) and that the integral
/// over [0, tau_star] is positive. Returns the violations, empty when valid.
std::vector<std::string> validate_weight(const MemoryWeight& weight, const DelayProfile& delay);

enum class IntegralMode { closed_form, quadrature };

/// h(t) = integral of alpha over [0, tau(t)].
double h_of_t(const MemoryWeight& weight, const DelayProfile& delay, double t,
              IntegralMode mode = IntegralMode::closed_form);

/// Lower constant: integral of alpha over [0, tau_star]. Throws
/// ValidationError when it is not strictly positive.
double a_bar(const MemoryWeight& weight, const DelayProfile& delay,
             IntegralMode mode = IntegralMode::closed_form);

/// Adaptive composite 5-point Gauss-Legendre quadrature with interval
/// halving. Throws NumericError carrying the residual estimate when the
/// relative tolerance is not met within max_depth halvings.
double integrate_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                double rel_tol = 1e-10, int max_depth = 30);

std::string to_string(KernelFamily f);
std::string to_string(DelayFamily f);
std::string to_string(WeightFamily f);

}  // namespace hkd
