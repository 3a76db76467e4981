#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "hkdelay/errors.hpp"
#include "hkdelay/kernels.hpp"

using namespace hkd;

namespace {

// Plain composite Simpson, independent of the library's quadrature.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double numeric_lipschitz(const InfluenceKernel& k, double r_max) {
    double best = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double a = r_max * i / n, b = r_max * (i + 1) / n;
        best = std::max(best, std::abs(k(b) - k(a)) / (b - a));
    }
    return best;
}

bool mentions(const std::exception& e, const std::string& what) {
    return std::string(e.what()).find(what) != std::string::npos;
}

}  // namespace

TEST_CASE("influence kernels: values at fixed points") {
    CHECK(InfluenceKernel::constant()(0.0) == 1.0);
    CHECK(InfluenceKernel::constant()(123.0) == 1.0);
    CHECK(InfluenceKernel::power_law(1.0)(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(InfluenceKernel::power_law(0.5)(std::sqrt(3.0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(InfluenceKernel::exponential(2.0)(0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    for (auto k : {InfluenceKernel::constant(), InfluenceKernel::power_law(2.5), InfluenceKernel::exponential(0.7)})
        CHECK(k(0.0) == 1.0);
}

TEST_CASE("influence kernels: non-increasing and positive") {
    for (auto k : {InfluenceKernel::power_law(1.0), InfluenceKernel::power_law(3.0), InfluenceKernel::exponential(4.0)}) {
        double prev = k(0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double v = k(0.01 * i);
            CHECK(v > 0.0);
            CHECK(v <= prev);
            prev = v;
        }
    }
}

TEST_CASE("influence kernels: from_squared agrees with psi(r)") {
    for (auto k : {InfluenceKernel::constant(), InfluenceKernel::power_law(1.5), InfluenceKernel::exponential(1.3)})
        for (double r : {0.0, 0.1, 0.5, 1.0, 2.0, 7.5})
            CHECK(k.from_squared(r * r) == doctest::Approx(k(r)).epsilon(1e-14));
}

TEST_CASE("influence kernels: Lipschitz constants match finite differences") {
    const auto pl = InfluenceKernel::power_law(1.0);
    CHECK(pl.lipschitz_bound() == doctest::Approx(9.0 / (8.0 * std::sqrt(3.0))).epsilon(1e-14));
    for (auto k : {InfluenceKernel::power_law(1.0), InfluenceKernel::power_law(2.0), InfluenceKernel::exponential(3.0)}) {
        const double num = numeric_lipschitz(k, 5.0);
        CHECK(num <= k.lipschitz_bound() * (1.0 + 1e-9));
        CHECK(num >= k.lipschitz_bound() * (1.0 - 1e-3));
    }
    CHECK(InfluenceKernel::constant().lipschitz_bound() == 0.0);
}

TEST_CASE("influence kernels: domain and parameter errors") {
    CHECK_THROWS_AS(InfluenceKernel::constant()(-1e-12), DomainError);
    CHECK_THROWS_AS(InfluenceKernel::power_law(1.0)(std::nan("")), DomainError);
    try {
        InfluenceKernel::power_law(-1.0);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(mentions(e, "kernel.exponent"));
    }
    CHECK_THROWS_AS(InfluenceKernel::exponential(0.0), ValidationError);
}

TEST_CASE("delay profiles") {
    const auto c = DelayProfile::constant(0.25);
    CHECK(c(0.0) == 0.25);
    CHECK(c(100.0) == 0.25);
    CHECK(c.tau_star() == 0.25);

    const auto lin = DelayProfile::linear_decreasing(0.5, 0.2, 0.1);
    CHECK(lin(0.0) == doctest::Approx(0.5));
    CHECK(lin(1.0) == doctest::Approx(0.4));
    CHECK(lin(10.0) == doctest::Approx(0.2));
    CHECK(lin.tau_zero() == 0.5);
    CHECK(lin.tau_star() == 0.2);

    const auto moved = lin.with_tau_zero(0.6);
    CHECK(moved.tau_zero() == 0.6);
    CHECK(moved.tau_star() == 0.2);
    CHECK(lin.with_tau_zero(0.1).tau_star() <= 0.1);

    CHECK_THROWS_AS(DelayProfile::constant(0.0), ValidationError);
    try {
        DelayProfile::linear_decreasing(0.1, 0.2, -1.0);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.violations().size() == 2);
        CHECK(mentions(e, "delay.tau0"));
        CHECK(mentions(e, "delay.slope"));
    }
}

TEST_CASE("memory weights: closed-form integrals against Simpson") {
    const MemoryWeight ws[] = {MemoryWeight::constant(2.0), MemoryWeight::exponential(1.0),
                               MemoryWeight::exponential(-0.5), MemoryWeight::polynomial({1.0, -0.5, 0.25})};
    for (const auto& w : ws)
        for (double u : {0.01, 0.25, 1.0, 2.0}) {
            const double oracle = simpson([&](double s) { return w(s); }, 0.0, u);
            CHECK(w.integral(u) == doctest::Approx(oracle).epsilon(1e-12));
        }
}

TEST_CASE("h(t) and A-bar") {
    const auto w = MemoryWeight::exponential(1.0);
    const auto d = DelayProfile::constant(1.0);
    CHECK(h_of_t(w, d, 0.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(h_of_t(w, d, 3.0, IntegralMode::quadrature) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
    CHECK_THROWS_AS(h_of_t(w, d, -0.1), DomainError);

    const auto lin = DelayProfile::linear_decreasing(0.5, 0.2, 0.1);
    const auto one = MemoryWeight::constant(1.0);
    CHECK(h_of_t(one, lin, 1.0) == doctest::Approx(0.4));
    CHECK(a_bar(one, lin) == doctest::Approx(0.2));
    CHECK(a_bar(w, lin, IntegralMode::quadrature) == doctest::Approx(1.0 - std::exp(-0.2)).epsilon(1e-10));
    CHECK_THROWS_AS(a_bar(MemoryWeight::polynomial({0.0}), lin), ValidationError);
}

TEST_CASE("memory weights: validation") {
    const auto d = DelayProfile::constant(1.0);
    CHECK(validate_weight(MemoryWeight::constant(1.0), d).empty());
    // 1 - 1.5s is negative past s = 2/3.
    const auto neg = validate_weight(MemoryWeight::polynomial({1.0, -1.5}), d);
    REQUIRE(neg.size() == 1);
    CHECK(neg[0].find("negative") != std::string::npos);
    CHECK(!validate_weight(MemoryWeight::polynomial({0.0}), d).empty());
    CHECK_THROWS_AS(MemoryWeight::constant(-1.0), ValidationError);
    CHECK_THROWS_AS(MemoryWeight::polynomial({}), ValidationError);
    CHECK(std::string(kDiracWeightMessage).find("dirac") != std::string::npos);
}

TEST_CASE("adaptive Gauss-Legendre") {
    CHECK(integrate_gauss_legendre([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(integrate_gauss_legendre([](double x) { return std::exp(x); }, 0.0, 1.0) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    CHECK_THROWS_AS(integrate_gauss_legendre([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-14, 2),
                    NumericError);
}
