#pragma once

// Right-hand side and time stepping of the delayed Hegselmann-Krause system
//
//   dx_i/dt = 1/(N h(t)) sum_{j != i} int_{t - tau(t)}^t alpha(t - s) a_ij(t; s) (x_j(s) - x_i(t)) ds
//
// integrated by the method of steps: classical RK4 with fixed step, delayed
// states read back from a HistoryBuffer. The s-integral is a composite
// trapezoid rule on uniformly spaced nodes spanning the delay window.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hkdelay/history.hpp"
#include "hkdelay/kernels.hpp"

namespace hkd {

enum class WeightScheme { symmetric, normalized };

std::string to_string(WeightScheme s);

struct ModelConfig {
    std::size_t agents = 2;
    std::size_t dim = 1;
    WeightScheme scheme = WeightScheme::symmetric;
    InfluenceKernel kernel = InfluenceKernel::constant();
    DelayProfile delay = DelayProfile::constant(0.25);
    MemoryWeight weight = MemoryWeight::constant(1.0);
    double dt = 0.0125;
    double t_end = 5.0;
    /// Trapezoid nodes over the delay window, end points included.
    std::size_t quadrature_nodes = 32;

    /// Every violated invariant, named by field. Empty when valid.
    std::vector<std::string> validate() const;
    /// Throws ValidationError listing all violations.
    void require_valid() const;
};

/// a_ij(t; s). all_x_at_s (agents x dim, agent-major) is only read by the
/// normalized scheme, whose denominator runs over every k including k = i.
double comm_weight(WeightScheme scheme, const InfluenceKernel& kernel, std::span<const double> x_j_at_s,
                   std::span<const double> x_i_at_t, std::span<const double> all_x_at_s);

/// Scratch space reused across right-hand-side evaluations.
class RhsWorkspace {
public:
    simd::PointCloud delayed;
    std::vector<double> scratch;
    std::vector<double> weighted;
};

/// Velocities (agents x dim) at time t for positions x. Samples inside
/// (history.t_back(), t] come from the stage tail when one is given.
void rhs(double t, std::span<const double> x, const HistoryBuffer& history, const ModelConfig& config,
         std::span<double> out, RhsWorkspace& ws, const StageTail* tail = nullptr);
std::vector<double> rhs(double t, std::span<const double> x, const HistoryBuffer& history,
                        const ModelConfig& config, const StageTail* tail = nullptr);

double max_speed(std::span<const double> velocity, std::size_t dim);

struct StepResult {
    std::vector<double> x_next;
    std::vector<double> velocity_next;
    double speed_max_next = 0.0;
};

/// One RK4 step of size config.dt from (t, x). velocity must be rhs(t, x)
/// with the current history. Stage states are not inserted into history.
/// Does not append; simulate() does that.
StepResult step(double t, std::span<const double> x, std::span<const double> velocity,
                const HistoryBuffer& history, const ModelConfig& config, RhsWorkspace& ws);

/// Stored solution: initial-history stamps (t < 0) followed by every
/// accepted step from t = 0 to t_end.
struct Trajectory {
    std::size_t agents = 0;
    std::size_t dim = 0;
    std::vector<double> times;
    std::vector<double> states;  // times.size() * agents * dim
    std::vector<double> speed_max;
    std::size_t origin = 0;      // index of t = 0
    double radius = 0.0;         // uniform bound from the initial data

    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> state(std::size_t k) const {
        const std::size_t w = agents * dim;
        return {states.data() + k * w, w};
    }
    /// Positions at time t, linear between stamps.
    std::vector<double> state_at(double t) const;
    /// Number of recorded steps with t >= 0.
    std::size_t steps() const noexcept { return times.size() - origin; }

    /// CSV: t, agent, x_1..x_d, speed_max for every stamp with t >= 0.
    void write_csv(std::ostream& os) const;
};

/// Called after every accepted step with the updated history.
using StepObserver = std::function<void(double t, std::span<const double> x, const HistoryBuffer& history)>;

/// Seeds a history from the initial data, then steps to t_end. Throws
/// IntegratorAccuracyError when max_i |x_i| exceeds the initial radius by
/// more than radius_tolerance.
Trajectory simulate(const ModelConfig& config, const InitialHistory& initial, double radius_tolerance = 1e-8,
                    const StepObserver& observer = {});

/// History stamps used to start a run: the dt grid -k dt (k >= 0) reaching
/// past -tau(0), merged with the sample times of a sampled path.
std::vector<double> seed_times(const InitialHistory& initial, double tau0, double dt);

/// Extremes of a_ij(t; s) and of the row sums (1/N) sum_j a_ij over every
/// quadrature node of one right-hand-side evaluation.
struct WeightAudit {
    double min_weight = 0.0;
    double max_weight = 0.0;
    double max_row_mean = 0.0;
};

WeightAudit audit_weights(double t, std::span<const double> x, const HistoryBuffer& history,
                          const ModelConfig& config);

}  // namespace hkd
