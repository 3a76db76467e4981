#pragma once

// Post-processing of trajectories: opinion diameter, the delayed speed
// functional gamma(t), the Lyapunov functional, and the sufficient consensus
// condition with its guaranteed exponential rate.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hkdelay/dynamics.hpp"
#include "hkdelay/history.hpp"
#include "hkdelay/kernels.hpp"

namespace hkd {

/// max_{i,j} |x_i - x_j| over an agents x dim array.
double diameter(std::span<const double> x, std::size_t dim);

/// R = max over s in [-tau0, 0] of max_i |x_{i,0}(s)|, scanned on a grid of
/// spacing <= spacing plus every sample node of the path.
double initial_radius(const InitialHistory& initial, double tau0, double spacing);

/// Running integral of the recorded max-speed series, treated as piecewise
/// linear between stamps, so integrals over arbitrary sub-intervals are exact
/// for that interpolant.
class SpeedIntegral {
public:
    explicit SpeedIntegral(const Trajectory& traj);
    /// integral of max_k |dx_k/dz| over [a, b]
    double between(double a, double b) const;
    double speed_at(double z) const;
    double cumulative(double z) const;
    double front() const { return times_.front(); }
    double back() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }

private:
    std::vector<double> times_;
    std::vector<double> speeds_;
    std::vector<double> cum_;
};

/// gamma(t) = 1/h(t) int_{t-tau(t)}^t alpha(t-s) int_s^t M(z) dz ds with M
/// the max-speed series. Outer trapezoid on the right-hand-side nodes.
double gamma(double t, const SpeedIntegral& speed, const ModelConfig& config);
double gamma(double t, const Trajectory& traj, const ModelConfig& config);

/// Lyapunov functional
///   d_X(t) + beta int_0^tau(t) alpha(s) int_{t-s}^t e^{-(t-sigma)} int_sigma^t M(rho) drho dsigma ds.
/// beta >= 0 (beta = 0 returns d_X).
double lyapunov(double t, const Trajectory& traj, const SpeedIntegral& speed, const ModelConfig& config,
                double beta);
double lyapunov(double t, const Trajectory& traj, const ModelConfig& config, double beta);

struct ConsensusCertificate {
    double R = 0.0;
    double psi_2R = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    std::optional<double> beta_min;
    std::optional<double> beta_max;
    std::optional<double> beta_chosen;
    std::optional<double> K;

    /// {R, psi_2R, lhs, rhs, holds, beta_min, beta_max, beta_chosen, K}; the
    /// optional fields are null when the condition fails.
    std::string to_json() const;
};

/// Guaranteed rate for a given beta: min{beta, psi - beta h(0)(1 - e^{-tau(0)})/psi}.
double rate_for_beta(double beta, double psi_2R, double h0, double tau0);

ConsensusCertificate certify(const InfluenceKernel& kernel, const DelayProfile& delay, const MemoryWeight& weight,
                             double R);

struct DiagnosticsSeries {
    std::vector<double> t;
    std::vector<double> d_X;
    std::vector<double> gamma;
    std::vector<double> lyapunov;  // NaN when no beta was supplied
    std::vector<double> speed_max;

    std::size_t size() const noexcept { return t.size(); }
    /// CSV: t, d_X, gamma, lyapunov, speed_max
    void write_csv(std::ostream& os) const;
};

/// Diagnostics at every recorded step t >= 0.
DiagnosticsSeries compute_series(const Trajectory& traj, const ModelConfig& config, std::optional<double> beta);

struct DecayFit {
    double rate = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS residual of log d_X
    std::size_t points = 0;
    /// d_X reached numerical zero inside the window; rate is +inf.
    bool reached_zero = false;
};

/// Least-squares line through log d_X(t) on [t_a, t_b]; rate = -slope.
DecayFit fit_decay_rate(const DiagnosticsSeries& series, double t_a, double t_b);
DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> d_X, double t_a, double t_b);

/// Outcome of a discrete inequality check along a series.
struct InequalityCheck {
    bool ok = true;
    std::size_t checked = 0;
    std::size_t violations = 0;
    /// Largest (lhs - rhs) / scale seen; <= eps when ok.
    double worst_relative_excess = -1.0;
    std::size_t worst_index = 0;
};

/// e^{K t_{k+1}} L(t_{k+1}) <= e^{K t_k} L(t_k) (1 + eps).
InequalityCheck check_lyapunov_decay(const DiagnosticsSeries& s, double K, double eps);

/// Forward-difference form of the diameter inequality:
///   (d_{k+1} - d_k)/dt <= (2/psi) gamma_k - psi d_k + eps * ((2/psi) gamma_k + psi d_k) + floor
/// floor = 64 ulp(R)/dt absorbs rounding once d_X is tiny.
InequalityCheck check_dini(const DiagnosticsSeries& s, double psi_2R, double R, double eps);

/// speed_max_k <= (gamma_k + d_k)/psi + eps * (gamma_k + d_k)/psi + floor.
InequalityCheck check_speed_bound(const DiagnosticsSeries& s, double psi_2R, double R, double eps);

}  // namespace hkd
