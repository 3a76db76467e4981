#include "hkdelay/meanfield.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "hkdelay/assignment.hpp"
#include "hkdelay/errors.hpp"

namespace hkd {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_opt(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return "null";
    return num(*v);
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// z with Phi(z) = p inside [lo, hi], by bisection.
double normal_quantile(double p, double lo, double hi) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std_normal_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double midpoint(std::size_t i, std::size_t n) { return (static_cast<double>(i) + 0.5) / static_cast<double>(n); }

double truncated_normal_quantile(double p, double mean, double sd, double radius) {
    const double zr = radius / sd;
    const double lo = std_normal_cdf(-zr);
    const double hi = std_normal_cdf(zr);
    return mean + sd * normal_quantile(lo + p * (hi - lo), -zr, zr);
}

double truncated_normal_draw(std::mt19937_64& rng, double mean, double sd, double radius) {
    std::normal_distribution<double> nd(mean, sd);
    for (;;) {
        const double x = nd(rng);
        if (std::abs(x - mean) <= radius) return x;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// EmpiricalMeasure

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points)
    : dim_(dim), points_(std::move(points)) {
    if (dim_ == 0) throw ValidationError("measure: dim must be >= 1");
    if (points_.empty() || points_.size() % dim_ != 0)
        throw ValidationError("measure: need M >= 1 atoms of dimension " + std::to_string(dim_));
    for (double v : points_)
        if (!std::isfinite(v)) throw ValidationError("measure: non-finite atom coordinate");
}

EmpiricalMeasure EmpiricalMeasure::from_state(std::span<const double> x, std::size_t dim) {
    return EmpiricalMeasure(dim, std::vector<double>(x.begin(), x.end()));
}

EmpiricalMeasure EmpiricalMeasure::replicated(std::size_t factor) const {
    if (factor == 0) throw ValidationError("measure: replication factor must be >= 1");
    std::vector<double> out;
    out.reserve(points_.size() * factor);
    for (std::size_t k = 0; k < size(); ++k)
        for (std::size_t r = 0; r < factor; ++r) out.insert(out.end(), atom(k).begin(), atom(k).end());
    return EmpiricalMeasure(dim_, std::move(out));
}

EmpiricalMeasure EmpiricalMeasure::translated(std::span<const double> shift) const {
    if (shift.size() != dim_) throw ValidationError("measure: shift has wrong dimension");
    std::vector<double> out = points_;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += shift[k % dim_];
    return EmpiricalMeasure(dim_, std::move(out));
}

// ---------------------------------------------------------------------------
// Initial measures

std::string to_string(MeasureFamily f) {
    switch (f) {
        case MeasureFamily::uniform_interval: return "uniform_interval";
        case MeasureFamily::gaussian_truncated: return "gaussian_truncated";
        case MeasureFamily::two_clusters: return "two_clusters";
        case MeasureFamily::explicit_points: return "explicit_points";
    }
    return "unknown";
}

std::vector<std::string> InitialMeasureSpec::validate() const {
    std::vector<std::string> v;
    if (dim == 0) v.push_back("initial.dim: must be >= 1");
    if (!constant_in_s)
        v.push_back(
            "initial.constant_in_s: only measures constant over [-tau(0), 0] are supported; give per-agent "
            "paths with initial.type = sampled_path instead");
    const bool continuous = family != MeasureFamily::explicit_points;
    if (quantile && continuous && dim != 1)
        v.push_back("initial.quantile: quantile stratification is only defined for dim = 1");
    switch (family) {
        case MeasureFamily::uniform_interval:
            if (!(std::isfinite(a) && std::isfinite(b) && a < b)) v.push_back("initial.a/initial.b: need finite a < b");
            break;
        case MeasureFamily::gaussian_truncated:
            if (!std::isfinite(mean)) v.push_back("initial.mean: must be finite");
            if (!(sd > 0.0 && std::isfinite(sd))) v.push_back("initial.sd: must be > 0");
            if (!(radius > 0.0 && std::isfinite(radius))) v.push_back("initial.radius: must be > 0");
            break;
        case MeasureFamily::two_clusters:
            if (c1.size() != dim) v.push_back("initial.c1: must have dim entries");
            if (c2.size() != dim) v.push_back("initial.c2: must have dim entries");
            for (double c : c1)
                if (!std::isfinite(c)) v.push_back("initial.c1: non-finite entry");
            for (double c : c2)
                if (!std::isfinite(c)) v.push_back("initial.c2: non-finite entry");
            if (!(spread >= 0.0 && std::isfinite(spread))) v.push_back("initial.spread: must be >= 0");
            break;
        case MeasureFamily::explicit_points:
            if (points.empty() || dim == 0 || points.size() % dim != 0)
                v.push_back("initial.points: need a non-empty list of dim-vectors");
            for (double p : points)
                if (!std::isfinite(p)) {
                    v.push_back("initial.points: non-finite entry");
                    break;
                }
            break;
    }
    return v;
}

double InitialMeasureSpec::support_radius() const {
    const double root_d = std::sqrt(static_cast<double>(dim));
    switch (family) {
        case MeasureFamily::uniform_interval: return std::max(std::abs(a), std::abs(b)) * root_d;
        case MeasureFamily::gaussian_truncated: return (std::abs(mean) + radius) * root_d;
        case MeasureFamily::two_clusters: return std::max(norm(c1), norm(c2)) + spread * root_d;
        case MeasureFamily::explicit_points: {
            double r = 0.0;
            for (std::size_t k = 0; k + dim <= points.size(); k += dim)
                r = std::max(r, norm(std::span<const double>(points.data() + k, dim)));
            return r;
        }
    }
    return 0.0;
}

InitialHistory sample_particles(const InitialMeasureSpec& spec, std::size_t N) {
    auto violations = spec.validate();
    if (N < 2) violations.push_back("N: need at least 2 particles");
    if (spec.family == MeasureFamily::explicit_points && spec.dim > 0 && !spec.points.empty() &&
        N % (spec.points.size() / spec.dim) != 0)
        violations.push_back("N: must be a multiple of the number of explicit points (" +
                             std::to_string(spec.points.size() / spec.dim) + ")");
    if (!violations.empty()) throw ValidationError(violations);

    const std::size_t d = spec.dim;
    std::vector<double> x(N * d);
    std::mt19937_64 rng(spec.seed);
    switch (spec.family) {
        case MeasureFamily::uniform_interval:
            if (spec.quantile) {
                for (std::size_t i = 0; i < N; ++i) x[i] = spec.a + (spec.b - spec.a) * midpoint(i, N);
            } else {
                std::uniform_real_distribution<double> u(spec.a, spec.b);
                for (double& v : x) v = u(rng);
            }
            break;
        case MeasureFamily::gaussian_truncated:
            if (spec.quantile) {
                for (std::size_t i = 0; i < N; ++i)
                    x[i] = truncated_normal_quantile(midpoint(i, N), spec.mean, spec.sd, spec.radius);
            } else {
                for (double& v : x) v = truncated_normal_draw(rng, spec.mean, spec.sd, spec.radius);
            }
            break;
        case MeasureFamily::two_clusters: {
            const std::size_t n1 = (N + 1) / 2;
            std::uniform_real_distribution<double> u(-spec.spread, spec.spread);
            for (std::size_t i = 0; i < N; ++i) {
                const bool first = i < n1;
                const auto& c = first ? spec.c1 : spec.c2;
                const std::size_t local = first ? i : i - n1;
                const std::size_t count = first ? n1 : N - n1;
                for (std::size_t k = 0; k < d; ++k)
                    x[i * d + k] = c[k] + (spec.quantile ? spec.spread * (2.0 * midpoint(local, count) - 1.0)
                                                         : u(rng));
            }
            break;
        }
        case MeasureFamily::explicit_points: {
            const std::size_t K = spec.points.size() / d;
            const std::size_t copies = N / K;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t r = 0; r < copies; ++r)
                    std::copy_n(spec.points.begin() + static_cast<std::ptrdiff_t>(k * d), d,
                                x.begin() + static_cast<std::ptrdiff_t>((k * copies + r) * d));
            break;
        }
    }
    return InitialHistory::constant_per_agent(d, std::move(x));
}

// ---------------------------------------------------------------------------
// Distances

double wasserstein1_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1)
        throw UnsupportedInstance("wasserstein1_1d: measures must be one-dimensional; use the assignment solver");
    if (mu.size() != nu.size())
        throw UnsupportedInstance("wasserstein1_1d: atom counts differ (" + std::to_string(mu.size()) + " vs " +
                                  std::to_string(nu.size()) + "); replicate atoms or use wasserstein1");
    std::vector<double> a = mu.points(), b = nu.points();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    return s / static_cast<double>(a.size());
}

double wasserstein1_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != nu.dim()) throw UnsupportedInstance("wasserstein1_assignment: dimensions differ");
    if (mu.size() != nu.size())
        throw UnsupportedInstance("wasserstein1_assignment: atom counts differ; replicate atoms or use wasserstein1");
    const std::size_t M = mu.size();
    if (M > kAssignmentCap)
        throw SizeError("wasserstein1_assignment: M = " + std::to_string(M) + " exceeds the cap of " +
                        std::to_string(kAssignmentCap) + "; use the 1D path or subsample");
    const std::size_t d = mu.dim();
    std::vector<double> cost(M * M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = mu.atom(i)[c] - nu.atom(j)[c];
                s += diff * diff;
            }
            cost[i * M + j] = std::sqrt(s);
        }
    return solve_assignment(cost, M).cost / static_cast<double>(M);
}

double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != nu.dim()) throw UnsupportedInstance("wasserstein1: dimensions differ");
    const std::size_t L = std::lcm(mu.size(), nu.size());
    const EmpiricalMeasure a = L == mu.size() ? mu : mu.replicated(L / mu.size());
    const EmpiricalMeasure b = L == nu.size() ? nu : nu.replicated(L / nu.size());
    if (a.dim() == 1) return wasserstein1_1d(a, b);
    return wasserstein1_assignment(a, b);
}

double support_diameter(const EmpiricalMeasure& mu) { return diameter(mu.points(), mu.dim()); }

// ---------------------------------------------------------------------------
// Experiments

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
    std::size_t n = requested;
    if (n == 0) {
        if (const char* env = std::getenv("HKD_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end != env && v > 0) n = static_cast<std::size_t>(v);
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(n, jobs));
}

namespace {

template <class Fn>
void parallel_for(std::size_t jobs, std::size_t workers, Fn&& fn) {
    if (workers <= 1) {
        for (std::size_t k = 0; k < jobs; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < jobs; k = next++) fn(k);
        });
    for (auto& th : pool) th.join();
}

struct RunResult {
    std::vector<std::vector<double>> states;  // one per checkpoint
    double initial_diameter = 0.0;
    std::string error;
};

}  // namespace

std::string ConvergenceRow::to_json() const {
    std::string s = "{\"N\":" + std::to_string(N);
    s += ",\"t\":" + num(t);
    s += ",\"w1_to_next_N\":" + json_opt(w1_to_next_N);
    s += ",\"support_diameter\":" + json_opt(support_diameter);
    s += ",\"decay_bound\":" + json_opt(decay_bound);
    if (!error.empty()) {
        std::string esc;
        for (char c : error) {
            if (c == '"' || c == '\\') esc += '\\';
            esc += c;
        }
        s += ",\"error\":\"" + esc + "\"";
    }
    return s + "}";
}

void ConvergenceReport::write_jsonl(std::ostream& os) const {
    for (const auto& r : rows) os << r.to_json() << '\n';
}

ConvergenceReport convergence_experiment(const InitialMeasureSpec& spec, const ModelConfig& config,
                                         const std::vector<std::size_t>& N_list,
                                         const std::vector<double>& checkpoints, const ConvergenceOptions& options) {
    std::vector<std::string> violations = spec.validate();
    if (N_list.empty()) violations.push_back("meanfield.N: list is empty");
    for (std::size_t k = 0; k < N_list.size(); ++k) {
        if (N_list[k] < 2) violations.push_back("meanfield.N: every N must be >= 2");
        if (k > 0 && N_list[k] <= N_list[k - 1]) violations.push_back("meanfield.N: list must be increasing");
    }
    if (checkpoints.empty()) violations.push_back("meanfield.checkpoints: list is empty");
    for (double t : checkpoints)
        if (!(t >= 0.0 && t <= config.t_end))
            violations.push_back("meanfield.checkpoints: " + num(t) + " outside [0, t_end]");
    {
        ModelConfig probe = config;
        probe.agents = std::max<std::size_t>(2, config.agents);
        probe.dim = spec.dim;
        for (auto& v : probe.validate()) violations.push_back(v);
    }
    if (!violations.empty()) throw ValidationError(violations);

    ConvergenceReport report;
    report.certificate = certify(config.kernel, config.delay, config.weight, spec.support_radius());

    std::vector<RunResult> runs(N_list.size());
    parallel_for(N_list.size(), worker_count(options.threads, N_list.size()), [&](std::size_t k) {
        RunResult& out = runs[k];
        try {
            ModelConfig cfg = config;
            cfg.agents = N_list[k];
            cfg.dim = spec.dim;
            const InitialHistory init = sample_particles(spec, N_list[k]);
            out.initial_diameter = diameter(init.positions_at(0.0), spec.dim);
            const Trajectory traj = simulate(cfg, init);
            for (double t : checkpoints) out.states.push_back(traj.state_at(t));
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    const auto& cert = report.certificate;
    for (std::size_t k = 0; k < N_list.size(); ++k) {
        report.initial_diameter = std::max(report.initial_diameter, runs[k].initial_diameter);
        if (!runs[k].error.empty()) report.all_runs_ok = false;
    }
    // w1 per (k, checkpoint), filled where both runs succeeded.
    std::vector<std::vector<std::optional<double>>> w1(N_list.size(),
                                                       std::vector<std::optional<double>>(checkpoints.size()));
    for (std::size_t k = 0; k < N_list.size(); ++k) {
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            ConvergenceRow row;
            row.N = N_list[k];
            row.t = checkpoints[c];
            row.error = runs[k].error;
            if (runs[k].error.empty()) {
                const auto mu = EmpiricalMeasure::from_state(runs[k].states[c], spec.dim);
                row.support_diameter = support_diameter(mu);
                if (cert.holds && cert.K) {
                    row.decay_bound = runs[k].initial_diameter * std::exp(-*cert.K * row.t);
                    if (*row.support_diameter > *row.decay_bound * (1.0 + options.decay_eps))
                        report.decay_bound_holds = false;
                }
                if (k + 1 < N_list.size() && runs[k + 1].error.empty()) {
                    try {
                        const auto nu = EmpiricalMeasure::from_state(runs[k + 1].states[c], spec.dim);
                        row.w1_to_next_N = wasserstein1(mu, nu);
                        w1[k][c] = row.w1_to_next_N;
                    } catch (const std::exception& e) {
                        row.error = e.what();
                    }
                }
            }
            report.rows.push_back(std::move(row));
        }
    }
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        for (std::size_t k = 1; k < N_list.size(); ++k)
            if (w1[k][c] && w1[k - 1][c] && *w1[k][c] > *w1[k - 1][c] * (1.0 + 1e-9) + 1e-15)
                report.distances_nonincreasing = false;
    return report;
}

double perturbation_distance(const InitialMeasureSpec& spec, const ModelConfig& config, std::size_t N, double delta,
                             const std::vector<double>& checkpoints) {
    ModelConfig cfg = config;
    cfg.agents = N;
    cfg.dim = spec.dim;
    const InitialHistory base = sample_particles(spec, N);
    std::vector<double> moved = base.positions_at(0.0);
    // Independent per-atom directions, scaled by delta, so the perturbation
    // is not a rigid translation (which the dynamics would carry unchanged).
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : moved) v += delta * u(rng);
    const InitialHistory other = InitialHistory::constant_per_agent(spec.dim, moved);
    const Trajectory a = simulate(cfg, base);
    const Trajectory b = simulate(cfg, other);
    double worst = 0.0;
    for (double t : checkpoints) {
        const auto mu = EmpiricalMeasure::from_state(a.state_at(t), spec.dim);
        const auto nu = EmpiricalMeasure::from_state(b.state_at(t), spec.dim);
        worst = std::max(worst, wasserstein1(mu, nu));
    }
    return worst;
}

}  // namespace hkd
