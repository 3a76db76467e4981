#pragma once

// Particle representation of the kinetic limit. The measure at time t is the
// empirical measure of an N-agent simulation started from atoms of the
// initial measure; no transport equation is discretized on a grid.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hkdelay/diagnostics.hpp"
#include "hkdelay/dynamics.hpp"
#include "hkdelay/history.hpp"

namespace hkd {

/// Equal-weight atoms, M x d agent-major.
class EmpiricalMeasure {
public:
    EmpiricalMeasure(std::size_t dim, std::vector<double> points);
    static EmpiricalMeasure from_state(std::span<const double> x, std::size_t dim);

    std::size_t size() const noexcept { return points_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<double>& points() const noexcept { return points_; }
    std::span<const double> atom(std::size_t k) const { return {points_.data() + k * dim_, dim_}; }

    /// Every atom repeated `factor` times (same measure, factor * M atoms).
    EmpiricalMeasure replicated(std::size_t factor) const;
    EmpiricalMeasure translated(std::span<const double> shift) const;

private:
    std::size_t dim_;
    std::vector<double> points_;
};

enum class MeasureFamily { uniform_interval, gaussian_truncated, two_clusters, explicit_points };

std::string to_string(MeasureFamily f);

struct InitialMeasureSpec {
    MeasureFamily family = MeasureFamily::uniform_interval;
    std::size_t dim = 1;
    // uniform_interval: every coordinate in [a, b]
    double a = -1.0;
    double b = 1.0;
    // gaussian_truncated: N(mean, sd^2) per coordinate, conditioned on |x - mean| <= radius
    double mean = 0.0;
    double sd = 1.0;
    double radius = 1.0;
    // two_clusters: half the atoms uniform in the cube of half-width spread around each centre
    std::vector<double> c1{-1.0};
    std::vector<double> c2{1.0};
    double spread = 0.1;
    // explicit_points: K x dim, agent-major; N must be a multiple of K
    std::vector<double> points;

    /// g_s does not depend on s. Only true is supported here; time-varying
    /// initial measures go through per-atom sampled paths.
    bool constant_in_s = true;
    /// Midpoint quantiles instead of random draws (1D only).
    bool quantile = true;
    std::uint64_t seed = 0;

    std::vector<std::string> validate() const;
    /// Radius of a ball around 0 holding all the mass.
    double support_radius() const;
};

/// N atoms of the measure as a constant-in-s initial history.
InitialHistory sample_particles(const InitialMeasureSpec& spec, std::size_t N);

/// Sorted coupling; equal atom counts, d = 1.
double wasserstein1_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

constexpr std::size_t kAssignmentCap = 512;

/// Exact minimum-cost matching; equal atom counts <= kAssignmentCap, any d.
double wasserstein1_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// d_1 for arbitrary atom counts: both measures are replicated to the least
/// common multiple, then the 1D or assignment path is used.
double wasserstein1(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

double support_diameter(const EmpiricalMeasure& mu);

struct ConvergenceRow {
    std::size_t N = 0;
    double t = 0.0;
    std::optional<double> w1_to_next_N;  // empty for the largest N
    std::optional<double> support_diameter;
    std::optional<double> decay_bound;   // empty when the certificate fails
    std::string error;                   // per-N failure, empty on success

    std::string to_json() const;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    ConsensusCertificate certificate;
    /// max_s d_X(g_s) of the measure (diameter of the largest atom set).
    double initial_diameter = 0.0;
    /// At each checkpoint, d_1(N_k, N_k+1) does not increase with k.
    bool distances_nonincreasing = true;
    /// support_diameter <= decay_bound (1 + eps) everywhere; true when uncertified.
    bool decay_bound_holds = true;
    bool all_runs_ok = true;

    void write_jsonl(std::ostream& os) const;
};

struct ConvergenceOptions {
    double decay_eps = 5e-2;
    /// 0: hardware concurrency (or HKD_THREADS when set).
    std::size_t threads = 0;
};

/// One simulation per N (in parallel), diagnostics at each checkpoint.
/// config.agents is overridden by each N.
ConvergenceReport convergence_experiment(const InitialMeasureSpec& spec, const ModelConfig& config,
                                         const std::vector<std::size_t>& N_list,
                                         const std::vector<double>& checkpoints,
                                         const ConvergenceOptions& options = {});

/// Max over checkpoints of d_1 between runs started from the atoms and from
/// the atoms each moved by delta * U[-1, 1] per coordinate (seeded).
double perturbation_distance(const InitialMeasureSpec& spec, const ModelConfig& config, std::size_t N, double delta,
                             const std::vector<double>& checkpoints);

/// Worker count: HKD_THREADS when set and positive, else hardware
/// concurrency, capped by jobs.
std::size_t worker_count(std::size_t requested, std::size_t jobs);

}  // namespace hkd
