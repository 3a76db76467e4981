#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "hkdelay/assignment.hpp"
#include "hkdelay/errors.hpp"
#include "hkdelay/meanfield.hpp"

using namespace hkd;

namespace {

double brute_force_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    const std::size_t M = a.size(), d = a.dim();
    std::vector<std::size_t> perm(M);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            double r2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) r2 += std::pow(a.atom(i)[c] - b.atom(perm[i])[c], 2);
            s += std::sqrt(r2);
        }
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(M);
}

EmpiricalMeasure random_measure(std::mt19937_64& rng, std::size_t M, std::size_t d) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> p(M * d);
    for (double& v : p) v = g(rng);
    return EmpiricalMeasure(d, p);
}

ModelConfig certified_unit() {
    ModelConfig c;
    c.delay = DelayProfile::constant(0.25);
    c.dt = 0.0125;
    c.t_end = 5.0;
    return c;
}

}  // namespace

TEST_CASE("sampling: explicit points, quantiles, determinism") {
    InitialMeasureSpec e;
    e.family = MeasureFamily::explicit_points;
    e.points = {0.0, 1.0};
    CHECK(sample_particles(e, 2).positions_at(0.0) == std::vector<double>{0.0, 1.0});
    CHECK(sample_particles(e, 4).positions_at(0.0) == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    CHECK_THROWS_AS(sample_particles(e, 3), ValidationError);

    InitialMeasureSpec u;
    u.a = -1.0;
    u.b = 1.0;
    CHECK(sample_particles(u, 4).positions_at(0.0) == std::vector<double>{-0.75, -0.25, 0.25, 0.75});
    CHECK_THROWS_AS(sample_particles(u, 1), ValidationError);

    InitialMeasureSpec g;
    g.family = MeasureFamily::gaussian_truncated;
    g.mean = 0.5;
    g.sd = 0.3;
    g.radius = 0.6;
    const auto q = sample_particles(g, 101).positions_at(0.0);
    CHECK(q[50] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::is_sorted(q.begin(), q.end()));
    CHECK(q.front() >= -0.1);
    CHECK(q.back() <= 1.1);

    for (auto fam : {MeasureFamily::uniform_interval, MeasureFamily::gaussian_truncated, MeasureFamily::two_clusters}) {
        InitialMeasureSpec r;
        r.family = fam;
        r.dim = 2;
        r.quantile = false;
        r.c1 = {-1.0, 0.0};
        r.c2 = {1.0, 0.0};
        r.seed = 99;
        const auto a = sample_particles(r, 30).positions_at(0.0);
        const auto b = sample_particles(r, 30).positions_at(0.0);
        CHECK(a == b);
        const double R = r.support_radius();
        for (std::size_t i = 0; i < 30; ++i) CHECK(std::hypot(a[2 * i], a[2 * i + 1]) <= R + 1e-12);
        r.seed = 100;
        CHECK(sample_particles(r, 30).positions_at(0.0) != a);
    }
}

TEST_CASE("sampling: validation") {
    InitialMeasureSpec s;
    s.dim = 2;  // quantile mode is 1D only
    CHECK(!s.validate().empty());
    s.quantile = false;
    CHECK(s.validate().empty());
    s.constant_in_s = false;
    const auto v = s.validate();
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("sampled_path") != std::string::npos);
    InitialMeasureSpec bad;
    bad.a = 1.0;
    bad.b = 0.0;
    CHECK(!bad.validate().empty());
}

TEST_CASE("1D Wasserstein examples") {
    const EmpiricalMeasure d0(1, {0.0}), d1(1, {1.0});
    CHECK(wasserstein1_1d(d0, d1) == 1.0);
    const EmpiricalMeasure a(1, {0.0, 2.0}), b(1, {3.0, 1.0});
    CHECK(wasserstein1_1d(a, b) == 1.0);
    CHECK(brute_force_w1(a, b) == 1.0);
    CHECK(wasserstein1_1d(a, a) == 0.0);
    CHECK_THROWS_AS(wasserstein1_1d(a, d0), UnsupportedInstance);
    CHECK_THROWS_AS(wasserstein1_1d(EmpiricalMeasure(2, {0, 0}), EmpiricalMeasure(2, {1, 1})), UnsupportedInstance);
}

TEST_CASE("assignment solver against brute force and the sorted coupling") {
    std::mt19937_64 rng(5);
    const EmpiricalMeasure a(2, {0.0, 0.0, 1.0, 0.0, 0.0, 2.0}), b(2, {1.0, 1.0, -1.0, 0.5, 0.3, 0.3});
    CHECK(wasserstein1_assignment(a, b) == doctest::Approx(brute_force_w1(a, b)).epsilon(1e-12));
    for (int it = 0; it < 40; ++it) {
        const std::size_t M = 1 + it % 6, d = 1 + it % 3;
        const auto x = random_measure(rng, M, d), y = random_measure(rng, M, d);
        CHECK(std::abs(wasserstein1_assignment(x, y) - brute_force_w1(x, y)) <= 1e-12);
    }
    for (int it = 0; it < 20; ++it) {
        const std::size_t M = 5 + 12 * it;
        const auto x = random_measure(rng, M, 1), y = random_measure(rng, M, 1);
        CHECK(std::abs(wasserstein1_assignment(x, y) - wasserstein1_1d(x, y)) <= 1e-12);
    }
    CHECK_THROWS_AS(wasserstein1_assignment(random_measure(rng, 513, 1), random_measure(rng, 513, 1)), SizeError);
    CHECK_THROWS_AS(wasserstein1_assignment(a, EmpiricalMeasure(2, {0, 0})), UnsupportedInstance);

    const auto sol = solve_assignment({4, 1, 3, 2, 0, 5, 3, 2, 2}, 3);
    CHECK(sol.cost == 5.0);
    CHECK(sol.row_to_col == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("metric axioms and translation invariance") {
    std::mt19937_64 rng(8);
    for (int it = 0; it < 30; ++it) {
        const std::size_t M = 2 + it % 7, d = 1 + it % 3;
        const auto x = random_measure(rng, M, d), y = random_measure(rng, M, d), z = random_measure(rng, M, d);
        auto w = [&](const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
            return d == 1 && it % 2 ? wasserstein1_1d(p, q) : wasserstein1_assignment(p, q);
        };
        CHECK(std::abs(w(x, y) - w(y, x)) <= 1e-12);
        CHECK(w(x, x) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(w(x, z) <= w(x, y) + w(y, z) + 1e-10);
        // Reordering atoms changes nothing.
        std::vector<double> rev;
        for (std::size_t k = M; k-- > 0;) rev.insert(rev.end(), x.atom(k).begin(), x.atom(k).end());
        CHECK(w(x, EmpiricalMeasure(d, rev)) <= 1e-12);
        std::vector<double> shift(d, 3.25);
        CHECK(std::abs(w(x.translated(shift), y.translated(shift)) - w(x, y)) <= 1e-12);
    }
}

TEST_CASE("unequal atom counts via replication") {
    InitialMeasureSpec u;
    const auto m50 = EmpiricalMeasure::from_state(sample_particles(u, 50).positions_at(0.0), 1);
    const auto m100 = EmpiricalMeasure::from_state(sample_particles(u, 100).positions_at(0.0), 1);
    // Sorted-coupling oracle on the replicated grids: every pair is (b - a) / (4 * 100) apart.
    std::vector<double> a = m50.replicated(2).points(), b = m100.points();
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    CHECK(wasserstein1(m50, m100) == doctest::Approx(s / 100.0).epsilon(1e-14));
    CHECK(wasserstein1(m50, m100) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(m50.replicated(3).size() == 150);
}

TEST_CASE("support diameter") {
    CHECK(support_diameter(EmpiricalMeasure(1, {4.0})) == 0.0);
    CHECK(support_diameter(EmpiricalMeasure(1, {-1.0, 1.0})) == 2.0);
    const std::vector<double> p{0.1, 0.2, -0.5, 0.7, 0.9, -0.3};
    CHECK(support_diameter(EmpiricalMeasure(2, p)) == diameter(p, 2));
}

TEST_CASE("convergence experiment: point mass and certified uniform") {
    InitialMeasureSpec point;
    point.family = MeasureFamily::explicit_points;
    point.points = {0.4};
    auto cfg = certified_unit();
    cfg.t_end = 1.0;
    const auto r0 = convergence_experiment(point, cfg, {2, 4}, {0.0, 1.0});
    for (const auto& row : r0.rows) {
        CHECK(row.error.empty());
        CHECK(*row.support_diameter == 0.0);
        if (row.w1_to_next_N) CHECK(*row.w1_to_next_N == 0.0);
    }

    InitialMeasureSpec u;
    cfg = certified_unit();
    const auto r = convergence_experiment(u, cfg, {20, 40, 80}, {0.0, 1.0, 2.5, 5.0});
    REQUIRE(r.certificate.holds);
    CHECK(r.all_runs_ok);
    CHECK(r.decay_bound_holds);
    CHECK(r.distances_nonincreasing);
    CHECK(r.rows.size() == 12);
    // t = 0 row for N = 20: quantile grids of 20 and 40 atoms, (b - a) / (4 * 20).
    CHECK(*r.rows[0].w1_to_next_N == doctest::Approx(2.0 / 80.0).epsilon(1e-12));
    const double K = *r.certificate.K;
    for (const auto& row : r.rows)
        if (row.t == 5.0) CHECK(*row.support_diameter < std::exp(-K * 5.0) * 2.0);

    std::ostringstream os;
    r.write_jsonl(os);
    CHECK(os.str().rfind("{\"N\":20,\"t\":0,\"w1_to_next_N\":", 0) == 0);
    CHECK(os.str().find("\"w1_to_next_N\":null") != std::string::npos);

    CHECK_THROWS_AS(convergence_experiment(u, cfg, {40, 20}, {1.0}), ValidationError);
    CHECK_THROWS_AS(convergence_experiment(u, cfg, {20, 40}, {6.0}), ValidationError);
}

TEST_CASE("convergence experiment isolates failing runs") {
    InitialMeasureSpec e;
    e.family = MeasureFamily::explicit_points;
    e.points = {0.0, 1.0};
    auto cfg = certified_unit();
    cfg.t_end = 0.5;
    // 3 is not a multiple of the two explicit atoms; 4 still runs.
    const auto r = convergence_experiment(e, cfg, {3, 4}, {0.5});
    CHECK(!r.all_runs_ok);
    CHECK(!r.rows[0].error.empty());
    CHECK(r.rows[1].error.empty());
    CHECK(r.rows[1].support_diameter.has_value());
}

TEST_CASE("stability: distance scales with the perturbation") {
    InitialMeasureSpec u;
    auto cfg = certified_unit();
    cfg.t_end = 2.0;
    std::vector<double> ratios;
    for (double delta : {1e-2, 1e-3, 1e-4}) ratios.push_back(perturbation_distance(u, cfg, 30, delta, {0.5, 1.0, 2.0}) / delta);
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*lo > 0.0);
    CHECK(*hi / *lo < 10.0);
}

TEST_CASE("worker count") {
    CHECK(worker_count(3, 10) == 3);
    CHECK(worker_count(8, 2) == 2);
    CHECK(worker_count(0, 1) == 1);
}
