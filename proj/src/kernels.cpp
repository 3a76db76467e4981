#include "hkdelay/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hkdelay/errors.hpp"

namespace hkd {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// InfluenceKernel

InfluenceKernel InfluenceKernel::constant() { return {KernelFamily::constant, 0.0, 0.0}; }

InfluenceKernel InfluenceKernel::power_law(double exponent) {
    if (!finite_positive(exponent))
        throw ValidationError("kernel.exponent must be a positive finite number, got " +
                              fmt_num(exponent));
    // |psi'(r)| = 2 g r (1 + r^2)^(-g-1) peaks at r = 1/sqrt(2g + 1).
    const double r = 1.0 / std::sqrt(2.0 * exponent + 1.0);
    const double lip = 2.0 * exponent * r * std::pow(1.0 + r * r, -exponent - 1.0);
    return {KernelFamily::power_law, exponent, lip};
}

InfluenceKernel InfluenceKernel::exponential(double rate) {
    if (!finite_positive(rate))
        throw ValidationError("kernel.rate must be a positive finite number, got " + fmt_num(rate));
    return {KernelFamily::exponential, rate, rate};
}

double InfluenceKernel::operator()(double r) const {
    if (!(r >= 0.0)) throw DomainError("psi evaluated at negative or NaN distance " + fmt_num(r));
    switch (family_) {
        case KernelFamily::constant:
            return 1.0;
        case KernelFamily::power_law:
            return std::pow(1.0 + r * r, -param_);
        case KernelFamily::exponential:
            return std::exp(-param_ * r);
    }
    return 1.0;
}

double InfluenceKernel::from_squared(double r2) const noexcept {
    switch (family_) {
        case KernelFamily::constant:
            return 1.0;
        case KernelFamily::power_law:
            return std::pow(1.0 + r2, -param_);
        case KernelFamily::exponential:
            return std::exp(-param_ * std::sqrt(r2));
    }
    return 1.0;
}

double psi_eval(const InfluenceKernel& kernel, double r) { return kernel(r); }

// ---------------------------------------------------------------------------
// DelayProfile

DelayProfile DelayProfile::constant(double tau) {
    if (!finite_positive(tau))
        throw ValidationError("delay.tau must be a positive finite number, got " + fmt_num(tau));
    return {DelayFamily::constant, tau, tau, 0.0};
}

DelayProfile DelayProfile::linear_decreasing(double tau0, double tau_inf, double slope) {
    std::vector<std::string> v;
    if (!finite_positive(tau_inf)) v.push_back("delay.tau_inf must be positive, got " + fmt_num(tau_inf));
    if (!(std::isfinite(tau0) && tau0 >= tau_inf))
        v.push_back("delay.tau0 must be finite and >= delay.tau_inf, got " + fmt_num(tau0));
    if (!(std::isfinite(slope) && slope >= 0.0))
        v.push_back("delay.slope must be finite and >= 0 (tau non-increasing), got " + fmt_num(slope));
    if (!v.empty()) throw ValidationError(std::move(v));
    return {DelayFamily::linear_decreasing, tau0, tau_inf, slope};
}

double DelayProfile::operator()(double t) const noexcept {
    if (family_ == DelayFamily::constant) return tau0_;
    return std::max(tau_inf_, tau0_ - slope_ * std::max(t, 0.0));
}

DelayProfile DelayProfile::with_tau_zero(double tau0) const {
    if (family_ == DelayFamily::constant) return constant(tau0);
    return linear_decreasing(tau0, std::min(tau_inf_, tau0), slope_);
}

// ---------------------------------------------------------------------------
// MemoryWeight

MemoryWeight MemoryWeight::constant(double c) {
    if (!finite_positive(c))
        throw ValidationError("weight.c must be a positive finite number, got " + fmt_num(c));
    return {WeightFamily::constant, {c}};
}

MemoryWeight MemoryWeight::exponential(double rate) {
    if (!std::isfinite(rate)) throw ValidationError("weight.rate must be finite");
    return {WeightFamily::exponential, {rate}};
}

MemoryWeight MemoryWeight::polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw ValidationError("weight.coefficients must be non-empty");
    for (double c : coeffs)
        if (!std::isfinite(c)) throw ValidationError("weight.coefficients must be finite");
    return {WeightFamily::polynomial, std::move(coeffs)};
}

double MemoryWeight::operator()(double s) const noexcept {
    switch (family_) {
        case WeightFamily::constant:
            return coeffs_[0];
        case WeightFamily::exponential:
            return std::exp(-coeffs_[0] * s);
        case WeightFamily::polynomial: {
            double acc = 0.0;
            for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + *it;
            return acc;
        }
    }
    return 0.0;
}

double MemoryWeight::integral(double upper) const noexcept {
    switch (family_) {
        case WeightFamily::constant:
            return coeffs_[0] * upper;
        case WeightFamily::exponential: {
            const double rate = coeffs_[0];
            if (rate == 0.0) return upper;
            return -std::expm1(-rate * upper) / rate;
        }
        case WeightFamily::polynomial: {
            // sum_k c_k u^(k+1) / (k+1), Horner in u
            double acc = 0.0;
            for (std::size_t k = coeffs_.size(); k-- > 0;)
                acc = acc * upper + coeffs_[k] / static_cast<double>(k + 1);
            return acc * upper;
        }
    }
    return 0.0;
}

std::vector<std::string> validate_weight(const MemoryWeight& weight, const DelayProfile& delay) {
    std::vector<std::string> v;
    const double tau0 = delay.tau_zero();
    constexpr int kSamples = 4096;
    for (int k = 0; k <= kSamples; ++k) {
        const double s = tau0 * k / kSamples;
        const double a = weight(s);
        if (!(a >= 0.0)) {
            v.push_back("weight: alpha(" + fmt_num(s) + ") = " + fmt_num(a) +
                        " is negative on [0, tau(0)]");
            break;
        }
    }
    const double ab = weight.integral(delay.tau_star());
    if (!(ab > 0.0))
        v.push_back("weight: integral of alpha over [0, tau_star] must be > 0, got " + fmt_num(ab));
    return v;
}

// ---------------------------------------------------------------------------
// Integrals

double h_of_t(const MemoryWeight& weight, const DelayProfile& delay, double t, IntegralMode mode) {
    if (!(t >= 0.0)) throw DomainError("h(t) requires t >= 0, got " + fmt_num(t));
    const double tau = delay(t);
    if (mode == IntegralMode::closed_form) return weight.integral(tau);
    return integrate_gauss_legendre([&](double s) { return weight(s); }, 0.0, tau);
}

double a_bar(const MemoryWeight& weight, const DelayProfile& delay, IntegralMode mode) {
    const double ts = delay.tau_star();
    const double v = mode == IntegralMode::closed_form
                         ? weight.integral(ts)
                         : integrate_gauss_legendre([&](double s) { return weight(s); }, 0.0, ts);
    if (!(v > 0.0))
        throw ValidationError("weight: integral of alpha over [0, tau_star] must be > 0, got " +
                              fmt_num(v));
    return v;
}

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kGlNodes = {
    0.0, -0.5384693101056830910363144, 0.5384693101056830910363144,
    -0.9061798459386639927976269, 0.9061798459386639927976269};
constexpr std::array<double, 5> kGlWeights = {
    0.5688888888888888888888889, 0.4786286704993664680412915, 0.4786286704993664680412915,
    0.2369268850561890875142640, 0.2369268850561890875142640};

double gl5(const std::function<double(double)>& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t k = 0; k < kGlNodes.size(); ++k) acc += kGlWeights[k] * f(mid + half * kGlNodes[k]);
    return acc * half;
}

struct Adaptive {
    const std::function<double(double)>& f;
    double tol;
    int max_depth;
    double worst_residual = 0.0;
    bool failed = false;

    double run(double a, double b, double whole, int depth, double local_tol) {
        const double m = 0.5 * (a + b);
        const double left = gl5(f, a, m);
        const double right = gl5(f, m, b);
        const double refined = left + right;
        const double err = std::abs(refined - whole);
        if (err <= local_tol || depth >= max_depth) {
            if (err > local_tol) {
                failed = true;
                worst_residual = std::max(worst_residual, err);
            }
            return refined;
        }
        return run(a, m, left, depth + 1, 0.5 * local_tol) +
               run(m, b, right, depth + 1, 0.5 * local_tol);
    }
};

}  // namespace

double integrate_gauss_legendre(const std::function<double(double)>& f, double a, double b,
                                double rel_tol, int max_depth) {
    if (a == b) return 0.0;
    const double coarse = gl5(f, a, b);
    if (!std::isfinite(coarse)) throw NumericError("quadrature: non-finite integrand", coarse);
    // Absolute floor keeps integrals that are exactly zero from recursing forever.
    const double scale = std::max(std::abs(coarse), std::numeric_limits<double>::min());
    Adaptive ad{f, rel_tol * scale, max_depth};
    const double v = ad.run(a, b, coarse, 0, rel_tol * scale);
    if (ad.failed || !std::isfinite(v))
        throw NumericError("quadrature did not reach relative tolerance " + fmt_num(rel_tol) +
                               "; residual estimate " + fmt_num(ad.worst_residual),
                           ad.worst_residual);
    return v;
}

std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::constant: return "constant";
        case KernelFamily::power_law: return "power_law";
        case KernelFamily::exponential: return "exponential";
    }
    return "?";
}

std::string to_string(DelayFamily f) {
    return f == DelayFamily::constant ? "constant" : "linear_decreasing";
}

std::string to_string(WeightFamily f) {
    switch (f) {
        case WeightFamily::constant: return "constant";
        case WeightFamily::exponential: return "exponential";
        case WeightFamily::polynomial: return "polynomial";
    }
    return "?";
}

}  // namespace hkd
