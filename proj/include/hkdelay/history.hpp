#pragma once

// Trajectory storage for delayed lookups. The integrator appends one stamp
// per accepted step; the right-hand side reads positions anywhere in the
// delay window by linear interpolation between stamps.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hkdelay/simd/pairwise.hpp"

namespace hkd {

/// Initial data x_{i,0}(s) on [-tau(0), 0].
class InitialHistory {
public:
    enum class Kind { constant_per_agent, sampled_path };

    /// positions: agents x dim, agent-major.
    static InitialHistory constant_per_agent(std::size_t dim, std::vector<double> positions);

    /// times strictly increasing, first <= -tau(0), last == 0; states[k] is
    /// the agents x dim array at times[k]. The path between samples is linear.
    static InitialHistory sampled_path(std::size_t dim, std::vector<double> times,
                                       std::vector<std::vector<double>> states);

    Kind kind() const noexcept { return kind_; }
    std::size_t agents() const noexcept { return agents_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<std::vector<double>>& states() const noexcept { return states_; }

    /// Earliest time the data is defined at (-inf for constant histories).
    double start() const noexcept;

    /// Positions at s into out (agents * dim). Throws OutOfRangeError when s
    /// lies outside the sampled interval.
    void positions_at(double s, std::span<double> out) const;
    std::vector<double> positions_at(double s) const;

    /// max_k |dx_k/ds| of the initial path at s (right derivative; left at s = 0).
    double speed_max_at(double s) const;

    /// max over s in [-tau0, 0] of max_i |x_i(s)|: every sample node inside the
    /// window, the window end points, and a uniform grid of spacing <= spacing.
    double max_norm(double tau0, double spacing) const;

    /// Checks coverage of [-tau0, 0] and finiteness.
    std::vector<std::string> validate(double tau0) const;

private:
    Kind kind_ = Kind::constant_per_agent;
    std::size_t agents_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> times_;
    std::vector<std::vector<double>> states_;
};

/// Provisional end point beyond the last stored stamp, used while a step is
/// in progress: samples in (last stamp, t] interpolate toward this state.
struct StageTail {
    double t;
    std::span<const double> state;
};

class HistoryBuffer {
public:
    /// window: tau(0); dt: integrator step (pruning keeps window + 2 dt).
    HistoryBuffer(std::size_t agents, std::size_t dim, double window, double dt);

    /// Requires t > t_back(). Prunes stamps no longer needed by the window.
    void append(double t, std::span<const double> state, double speed_max);

    /// Positions (agents * dim) at s. Exact at stamps, linear in between.
    /// Throws OutOfRangeError outside [t_front, t_back] (or up to tail->t).
    void sample(double s, std::span<double> out, const StageTail* tail = nullptr) const;
    std::vector<double> sample(double s, const StageTail* tail = nullptr) const;

    /// Same as sample, written coordinate-major into a point cloud.
    void sample_into(double s, simd::PointCloud& out, const StageTail* tail = nullptr) const;

    double speed_max_at(double s) const;

    bool empty() const noexcept { return head_ == times_.size(); }
    std::size_t size() const noexcept { return times_.size() - head_; }
    double t_front() const;
    double t_back() const;
    double time(std::size_t k) const { return times_[head_ + k]; }
    std::span<const double> state(std::size_t k) const;
    double speed(std::size_t k) const { return speeds_[head_ + k]; }
    std::size_t agents() const noexcept { return agents_; }
    std::size_t dim() const noexcept { return dim_; }
    double window() const noexcept { return window_; }
    double step() const noexcept { return dt_; }

    /// CSV dump: t, agent, x_1..x_d (one row per agent per stamp).
    void write_csv(std::ostream& os) const;

private:
    // Index k with times_[k] <= s < times_[k+1] (k in [head_, size-2]), or the
    // last index when s equals the final stamp.
    std::size_t locate(double s) const;
    void compact();

    std::size_t agents_;
    std::size_t dim_;
    double window_;
    double dt_;
    std::size_t head_ = 0;
    std::vector<double> times_;
    std::vector<double> states_;
    std::vector<double> speeds_;
};

}  // namespace hkd
