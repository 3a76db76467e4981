#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "hkdelay/diagnostics.hpp"
#include "hkdelay/dynamics.hpp"
#include "hkdelay/errors.hpp"

using namespace hkd;

namespace {

HistoryBuffer constant_history(const std::vector<double>& x, std::size_t n, std::size_t d, double tau, double dt) {
    HistoryBuffer h(n, d, tau, dt);
    const int back = static_cast<int>(std::ceil(tau / dt)) + 2;
    for (int k = -back; k <= 0; ++k) h.append(k * dt, x, 0.0);
    return h;
}

ModelConfig pair_config(double tau) {
    ModelConfig c;
    c.agents = 2;
    c.dim = 1;
    c.delay = DelayProfile::constant(tau);
    c.dt = tau / 20.0;
    c.t_end = 1.0;
    return c;
}

}  // namespace

TEST_CASE("comm_weight examples") {
    const std::vector<double> xi{0.0}, xj{1.0}, all{0.0, 1.0};
    CHECK(comm_weight(WeightScheme::symmetric, InfluenceKernel::constant(), xj, xi, all) == 1.0);
    CHECK(comm_weight(WeightScheme::normalized, InfluenceKernel::constant(), xj, xi, all) == 1.0);
    CHECK(comm_weight(WeightScheme::symmetric, InfluenceKernel::power_law(1.0), xj, xi, all) ==
          doctest::Approx(0.5).epsilon(1e-15));
    // Denominator over k in {self (r = 0), other (r = 1)}: 2 * 0.5 / 1.5.
    CHECK(comm_weight(WeightScheme::normalized, InfluenceKernel::power_law(1.0), xj, xi, all) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("config validation names every violated field") {
    ModelConfig c = pair_config(0.25);
    CHECK(c.validate().empty());
    c.dt = 0.25;
    c.agents = 1;
    c.t_end = -1.0;
    const auto v = c.validate();
    REQUIRE(v.size() == 3);
    CHECK_THROWS_AS(c.require_valid(), ValidationError);
    auto has = [&](const char* key) {
        return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.rfind(key, 0) == 0; });
    };
    CHECK(has("dt"));
    CHECK(has("N"));
    CHECK(has("t_end"));
}

TEST_CASE("rhs: two agents at t = 0") {
    for (double tau : {0.1, 0.25, 1.0}) {
        auto cfg = pair_config(tau);
        const std::vector<double> x{0.0, 1.0};
        const auto h = constant_history(x, 2, 1, tau, cfg.dt);
        const auto v = rhs(0.0, x, h, cfg);
        CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(v[1] == doctest::Approx(-0.5).epsilon(1e-14));
    }
}

TEST_CASE("rhs: coincident agents are at rest, translations do not matter") {
    ModelConfig cfg = pair_config(0.25);
    cfg.agents = 4;
    cfg.dim = 2;
    cfg.kernel = InfluenceKernel::power_law(1.0);
    for (auto scheme : {WeightScheme::symmetric, WeightScheme::normalized}) {
        cfg.scheme = scheme;
        const std::vector<double> same(8, 0.3);
        const auto h0 = constant_history(same, 4, 2, 0.25, cfg.dt);
        for (double v : rhs(0.0, same, h0, cfg)) CHECK(v == 0.0);

        const std::vector<double> x{0.1, -0.2, 0.5, 0.4, -0.3, 0.0, 0.2, 0.9};
        std::vector<double> shifted = x;
        for (std::size_t k = 0; k < shifted.size(); k += 2) shifted[k] += 7.0;
        const auto a = rhs(0.0, x, constant_history(x, 4, 2, 0.25, cfg.dt), cfg);
        const auto b = rhs(0.0, shifted, constant_history(shifted, 4, 2, 0.25, cfg.dt), cfg);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-12));
    }
}

TEST_CASE("rhs: history gap is an out-of-range error") {
    auto cfg = pair_config(0.25);
    const std::vector<double> x{0.0, 1.0};
    HistoryBuffer h(2, 1, 0.25, cfg.dt);
    h.append(-0.1, x, 0.0);
    h.append(0.0, x, 0.0);
    CHECK_THROWS_AS(rhs(0.0, x, h, cfg), OutOfRangeError);
}

TEST_CASE("step: fixed point and antisymmetry") {
    auto cfg = pair_config(0.25);
    RhsWorkspace ws;
    {
        const std::vector<double> x{0.4, 0.4};
        auto h = constant_history(x, 2, 1, 0.25, cfg.dt);
        const auto v = rhs(0.0, x, h, cfg);
        const auto r = step(0.0, x, v, h, cfg, ws);
        CHECK(r.x_next == x);
        CHECK(r.speed_max_next == 0.0);
    }
    {
        const std::vector<double> x{-0.7, 0.7};
        auto h = constant_history(x, 2, 1, 0.25, cfg.dt);
        std::vector<double> cur = x, v = rhs(0.0, x, h, cfg);
        for (int k = 0; k < 100; ++k) {
            auto r = step(k * cfg.dt, cur, v, h, cfg, ws);
            CHECK(std::abs(r.x_next[0] + r.x_next[1]) < 1e-15);
            h.append((k + 1) * cfg.dt, r.x_next, r.speed_max_next);
            cur = r.x_next;
            v = r.velocity_next;
        }
    }
}

TEST_CASE("step: requires history to end at t") {
    auto cfg = pair_config(0.25);
    const std::vector<double> x{0.0, 1.0};
    auto h = constant_history(x, 2, 1, 0.25, cfg.dt);
    RhsWorkspace ws;
    const auto v = rhs(0.0, x, h, cfg);
    CHECK_THROWS_AS(step(cfg.dt, x, v, h, cfg, ws), OrderingError);
}

TEST_CASE("simulate: coincident agents stay together") {
    ModelConfig cfg = pair_config(0.25);
    cfg.agents = 3;
    const auto tr = simulate(cfg, InitialHistory::constant_per_agent(1, {0.2, 0.2, 0.2}));
    for (std::size_t k = tr.origin; k < tr.size(); ++k) CHECK(diameter(tr.state(k), 1) == 0.0);
}

TEST_CASE("simulate: small-delay limit decays at rate 1") {
    ModelConfig cfg = pair_config(0.01);
    cfg.dt = 0.0005;
    cfg.t_end = 5.0;
    const auto tr = simulate(cfg, InitialHistory::constant_per_agent(1, {0.0, 1.0}));
    std::vector<double> t, dx;
    for (std::size_t k = tr.origin; k < tr.size(); ++k) {
        t.push_back(tr.times[k]);
        dx.push_back(diameter(tr.state(k), 1));
    }
    const auto fit = fit_decay_rate(t, dx, 1.0, 5.0);
    CHECK(fit.rate >= 0.9);
    CHECK(fit.rate <= 1.1);
}

TEST_CASE("simulate: uniform bound, weight bounds, row sums") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto scheme : {WeightScheme::symmetric, WeightScheme::normalized}) {
        ModelConfig cfg;
        cfg.agents = 7;
        cfg.dim = 2;
        cfg.scheme = scheme;
        cfg.kernel = InfluenceKernel::exponential(1.5);
        cfg.delay = DelayProfile::linear_decreasing(0.3, 0.2, 0.05);
        cfg.weight = MemoryWeight::polynomial({1.0, 0.5});
        cfg.dt = 0.01;
        cfg.t_end = 2.0;
        std::vector<double> x0(14);
        for (double& v : x0) v = 0.6 * u(rng);
        const auto init = InitialHistory::constant_per_agent(2, x0);
        const double R = init.max_norm(0.3, cfg.dt);
        const double psi = cfg.kernel(2.0 * R);
        WeightAudit worst{1e300, 0.0, 0.0};
        std::size_t calls = 0;
        const auto tr = simulate(cfg, init, 1e-8, [&](double t, std::span<const double> x, const HistoryBuffer& h) {
            if (++calls % 10) return;
            const auto a = audit_weights(t, x, h, cfg);
            worst.min_weight = std::min(worst.min_weight, a.min_weight);
            worst.max_weight = std::max(worst.max_weight, a.max_weight);
            worst.max_row_mean = std::max(worst.max_row_mean, a.max_row_mean);
        });
        CHECK(worst.min_weight >= psi);
        CHECK(worst.max_weight <= 1.0 / psi);
        CHECK(worst.max_row_mean <= 1.0 + 1e-12);
        for (std::size_t k = tr.origin; k < tr.size(); ++k)
            for (std::size_t i = 0; i < 7; ++i)
                CHECK(std::hypot(tr.state(k)[2 * i], tr.state(k)[2 * i + 1]) <= R + 1e-8);
    }
}

TEST_CASE("simulate: radius guard raises the accuracy error") {
    auto cfg = pair_config(0.25);
    CHECK_THROWS_AS(simulate(cfg, InitialHistory::constant_per_agent(1, {0.0, 1.0}), -0.5),
                    IntegratorAccuracyError);
}

TEST_CASE("simulate: symmetric scheme is permutation equivariant") {
    ModelConfig cfg = pair_config(0.2);
    cfg.agents = 5;
    cfg.kernel = InfluenceKernel::power_law(2.0);
    const std::vector<double> x{0.3, -0.4, 0.9, 0.0, -0.8};
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<double> xp(5);
    for (std::size_t i = 0; i < 5; ++i) xp[i] = x[perm[i]];
    const auto a = simulate(cfg, InitialHistory::constant_per_agent(1, x));
    const auto b = simulate(cfg, InitialHistory::constant_per_agent(1, xp));
    REQUIRE(a.size() == b.size());
    for (std::size_t k = a.origin; k < a.size(); ++k)
        for (std::size_t i = 0; i < 5; ++i) CHECK(b.state(k)[i] == doctest::Approx(a.state(k)[perm[i]]).epsilon(1e-13));
}

TEST_CASE("simulate: sampled-path history") {
    ModelConfig cfg = pair_config(0.25);
    const auto init = InitialHistory::sampled_path(1, {-0.3, -0.1, 0.0}, {{0.0, 1.0}, {0.2, 0.8}, {0.1, 0.9}});
    const auto tr = simulate(cfg, init);
    CHECK(tr.times[tr.origin] == 0.0);
    CHECK(tr.times.front() <= -0.25);
    CHECK(tr.state(tr.origin)[0] == 0.1);
    CHECK(tr.state_at(-0.1)[1] == doctest::Approx(0.8));
    CHECK(diameter(tr.state(tr.size() - 1), 1) < diameter(tr.state(tr.origin), 1));
}

TEST_CASE("simulate: non-multiple horizon and determinism") {
    ModelConfig cfg = pair_config(0.25);
    cfg.t_end = 0.1 + 1e-3;
    const auto init = InitialHistory::constant_per_agent(1, {0.0, 1.0});
    const auto a = simulate(cfg, init);
    CHECK(a.times.back() >= cfg.t_end);
    CHECK(a.steps() == 10);  // ceil(0.101 / 0.0125) = 9 steps plus t = 0
    std::ostringstream s1, s2;
    a.write_csv(s1);
    simulate(cfg, init).write_csv(s2);
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().rfind("t,agent,x_1,speed_max\n0,0,0,", 0) == 0);
}
