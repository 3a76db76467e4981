#include "hkdelay/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "hkdelay/errors.hpp"
#include "hkdelay/simd/pairwise.hpp"

namespace hkd {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string json_num(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return "null";
    return num(*v);
}

}  // namespace

double diameter(std::span<const double> x, std::size_t dim) {
    if (dim == 0 || x.size() % dim != 0) throw ValidationError("diameter: array is not agents x dim");
    const std::size_t n = x.size() / dim;
    if (n <= 1) return 0.0;
    simd::PointCloud cloud;
    cloud.assign_rows(x.data(), n, dim);
    const auto& table = simd::kernels();
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // Points after i suffice: each pair is seen once.
        simd::PointsView tailv{cloud.view().data + i + 1, n - i - 1, dim, n};
        best = std::max(best, table.max_squared_distance(tailv, x.data() + i * dim));
    }
    return std::sqrt(best);
}

double initial_radius(const InitialHistory& initial, double tau0, double spacing) {
    return initial.max_norm(tau0, spacing);
}

// ---------------------------------------------------------------------------
// SpeedIntegral

SpeedIntegral::SpeedIntegral(const Trajectory& traj) : times_(traj.times), speeds_(traj.speed_max) {
    if (times_.empty()) throw ValidationError("speed integral: empty trajectory");
    cum_.resize(times_.size());
    cum_[0] = 0.0;
    for (std::size_t k = 1; k < times_.size(); ++k)
        cum_[k] = cum_[k - 1] + 0.5 * (times_[k] - times_[k - 1]) * (speeds_[k] + speeds_[k - 1]);
}

double SpeedIntegral::speed_at(double z) const {
    if (!(z >= times_.front() && z <= times_.back()))
        throw OutOfRangeError("speed series queried at z = " + num(z) + " outside recorded span");
    auto it = std::upper_bound(times_.begin(), times_.end(), z);
    if (it == times_.end()) return speeds_.back();
    const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    const double lam = (z - times_[k]) / (times_[k + 1] - times_[k]);
    return speeds_[k] + lam * (speeds_[k + 1] - speeds_[k]);
}

double SpeedIntegral::cumulative(double z) const {
    if (!(z >= times_.front() && z <= times_.back()))
        throw OutOfRangeError("speed series queried at z = " + num(z) + " outside recorded span");
    auto it = std::upper_bound(times_.begin(), times_.end(), z);
    if (it == times_.end()) return cum_.back();
    const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    const double lam = (z - times_[k]) / (times_[k + 1] - times_[k]);
    const double mz = speeds_[k] + lam * (speeds_[k + 1] - speeds_[k]);
    return cum_[k] + 0.5 * (z - times_[k]) * (speeds_[k] + mz);
}

double SpeedIntegral::between(double a, double b) const { return cumulative(b) - cumulative(a); }

// ---------------------------------------------------------------------------
// gamma and the Lyapunov functional

double gamma(double t, const SpeedIntegral& speed, const ModelConfig& config) {
    const double tau = config.delay(t);
    const double h = config.weight.integral(tau);
    if (t - tau < speed.front() || t > speed.back())
        throw OutOfRangeError("gamma: trajectory does not cover [" + num(t - tau) + ", " + num(t) + "]");
    const std::size_t m_nodes = config.quadrature_nodes;
    const double spacing = tau / static_cast<double>(m_nodes - 1);
    const double cum_t = speed.cumulative(t);
    double acc = 0.0;
    for (std::size_t m = 0; m < m_nodes; ++m) {
        const bool last = m + 1 == m_nodes;
        const double s = last ? t : t - tau + static_cast<double>(m) * spacing;
        double qw = spacing * config.weight(t - s);
        if (m == 0 || last) qw *= 0.5;
        acc += qw * (cum_t - speed.cumulative(s));
    }
    return acc / h;
}

double gamma(double t, const Trajectory& traj, const ModelConfig& config) {
    return gamma(t, SpeedIntegral(traj), config);
}

double lyapunov(double t, const Trajectory& traj, const SpeedIntegral& speed, const ModelConfig& config,
                double beta) {
    if (!(beta >= 0.0)) throw ValidationError("lyapunov: beta must be >= 0, got " + num(beta));
    const double dx = diameter(traj.state_at(t), traj.dim);
    if (beta == 0.0) return dx;
    const double tau = config.delay(t);
    if (t - tau < speed.front() || t > speed.back())
        throw OutOfRangeError("lyapunov: trajectory does not cover [" + num(t - tau) + ", " + num(t) + "]");

    // Lags u in [0, tau]: the rhs quadrature nodes merged with every recorded
    // stamp inside the window, so the speed interpolant's kinks are nodes.
    std::vector<double> lags;
    const std::size_t m_nodes = config.quadrature_nodes;
    for (std::size_t m = 0; m < m_nodes; ++m)
        lags.push_back(tau * static_cast<double>(m) / static_cast<double>(m_nodes - 1));
    for (double z : speed.times())
        if (z > t - tau && z < t) lags.push_back(t - z);
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, b); }),
               lags.end());

    const double cum_t = speed.cumulative(t);
    // inner(u) = int_{t-u}^t e^{-(t-sigma)} C(sigma) dsigma, C(sigma) = int_sigma^t M.
    double inner = 0.0;
    double prev_u = 0.0;
    double prev_f = 0.0;  // integrand at u = 0 is C(t) = 0
    double prev_g = 0.0;  // alpha(0) * inner(0) = 0
    double outer = 0.0;
    for (std::size_t k = 1; k < lags.size(); ++k) {
        const double u = lags[k];
        const double f = std::exp(-u) * (cum_t - speed.cumulative(t - u));
        inner += 0.5 * (u - prev_u) * (f + prev_f);
        const double g = config.weight(u) * inner;
        outer += 0.5 * (u - prev_u) * (g + prev_g);
        prev_u = u;
        prev_f = f;
        prev_g = g;
    }
    return dx + beta * outer;
}

double lyapunov(double t, const Trajectory& traj, const ModelConfig& config, double beta) {
    return lyapunov(t, traj, SpeedIntegral(traj), config, beta);
}

// ---------------------------------------------------------------------------
// Certificate

double rate_for_beta(double beta, double psi_2R, double h0, double tau0) {
    const double c = h0 * -std::expm1(-tau0);
    return std::min(beta, psi_2R - beta * c / psi_2R);
}

ConsensusCertificate certify(const InfluenceKernel& kernel, const DelayProfile& delay, const MemoryWeight& weight,
                             double R) {
    if (!(R >= 0.0) || !std::isfinite(R)) throw ValidationError("certify: R must be finite and >= 0, got " + num(R));
    ConsensusCertificate cert;
    cert.R = R;
    const double psi = kernel(2.0 * R);
    const double tau0 = delay.tau_zero();
    const double h0 = weight.integral(tau0);
    const double abar = a_bar(weight, delay);
    cert.psi_2R = psi;
    cert.lhs = std::expm1(tau0) * h0;
    cert.rhs = abar * psi * psi * psi / (2.0 + psi * psi);
    cert.holds = cert.lhs <= cert.rhs;
    if (!cert.holds) return cert;

    const double c = h0 * -std::expm1(-tau0);  // h(0)(1 - e^{-tau(0)})
    const double denom = std::exp(-tau0) * abar * psi - c;
    const double bmin = 2.0 / denom;
    const double bmax = psi * psi / c;
    if (!(denom > 0.0) || !(bmin < bmax))
        throw NumericError("certify: empty beta interval [" + num(bmin) + ", " + num(bmax) +
                           ") although the delay condition holds");
    // K(beta) rises as beta and falls as psi - beta c/psi; they cross at
    // psi^2/(psi + c), which is always below bmax.
    const double crossing = psi * psi / (psi + c);
    const double chosen = std::clamp(crossing, bmin, bmax);
    cert.beta_min = bmin;
    cert.beta_max = bmax;
    cert.beta_chosen = chosen;
    cert.K = rate_for_beta(chosen, psi, h0, tau0);
    if (!(*cert.K > 0.0)) throw NumericError("certify: non-positive rate from a feasible beta");
    return cert;
}

std::string ConsensusCertificate::to_json() const {
    std::string s = "{";
    s += "\"R\":" + num(R);
    s += ",\"psi_2R\":" + num(psi_2R);
    s += ",\"lhs\":" + num(lhs);
    s += ",\"rhs\":" + num(rhs);
    s += std::string(",\"holds\":") + (holds ? "true" : "false");
    s += ",\"beta_min\":" + json_num(beta_min);
    s += ",\"beta_max\":" + json_num(beta_max);
    s += ",\"beta_chosen\":" + json_num(beta_chosen);
    s += ",\"K\":" + json_num(K);
    s += "}";
    return s;
}

// ---------------------------------------------------------------------------
// Series

DiagnosticsSeries compute_series(const Trajectory& traj, const ModelConfig& config, std::optional<double> beta) {
    DiagnosticsSeries out;
    const SpeedIntegral speed(traj);
    const std::size_t n = traj.steps();
    out.t.reserve(n);
    for (std::size_t k = traj.origin; k < traj.size(); ++k) {
        const double t = traj.times[k];
        const double dx = diameter(traj.state(k), traj.dim);
        out.t.push_back(t);
        out.d_X.push_back(dx);
        out.gamma.push_back(gamma(t, speed, config));
        out.lyapunov.push_back(beta ? lyapunov(t, traj, speed, config, *beta)
                                    : std::numeric_limits<double>::quiet_NaN());
        out.speed_max.push_back(traj.speed_max[k]);
    }
    return out;
}

void DiagnosticsSeries::write_csv(std::ostream& os) const {
    os << "t,d_X,gamma,lyapunov,speed_max\n";
    for (std::size_t k = 0; k < t.size(); ++k)
        os << num(t[k]) << ',' << num(d_X[k]) << ',' << num(gamma[k]) << ',' << num(lyapunov[k]) << ','
           << num(speed_max[k]) << '\n';
}

// ---------------------------------------------------------------------------
// Decay fit

DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> d_X, double t_a, double t_b) {
    if (!(t_b > t_a)) throw ValidationError("fit_decay_rate: window must satisfy t_b > t_a");
    if (t.size() != d_X.size()) throw ValidationError("fit_decay_rate: series lengths differ");
    std::vector<double> xs, ys;
    DecayFit fit;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t_a || t[k] > t_b) continue;
        if (!(d_X[k] > std::numeric_limits<double>::min())) {
            fit.reached_zero = true;
            continue;
        }
        xs.push_back(t[k]);
        ys.push_back(std::log(d_X[k]));
    }
    fit.points = xs.size() + (fit.reached_zero ? 1 : 0);
    if (fit.reached_zero) {
        fit.rate = std::numeric_limits<double>::infinity();
        return fit;
    }
    if (xs.size() < 2) throw ValidationError("fit_decay_rate: fewer than two samples inside the window");
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.intercept = my - slope * mx;
    double ss = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double r = ys[k] - (fit.intercept + slope * xs[k]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(xs.size()));
    return fit;
}

DecayFit fit_decay_rate(const DiagnosticsSeries& series, double t_a, double t_b) {
    return fit_decay_rate(series.t, series.d_X, t_a, t_b);
}

// ---------------------------------------------------------------------------
// Inequality checks

namespace {

void record(InequalityCheck& c, double excess_rel, double eps, std::size_t k) {
    ++c.checked;
    if (excess_rel > c.worst_relative_excess || c.checked == 1) {
        c.worst_relative_excess = excess_rel;
        c.worst_index = k;
    }
    if (excess_rel > eps) {
        ++c.violations;
        c.ok = false;
    }
}

double rounding_floor(double R, double dt) {
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(R, 1.0) / dt;
}

}  // namespace

InequalityCheck check_lyapunov_decay(const DiagnosticsSeries& s, double K, double eps) {
    InequalityCheck c;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const double now = std::exp(K * s.t[k]) * s.lyapunov[k];
        const double next = std::exp(K * s.t[k + 1]) * s.lyapunov[k + 1];
        if (!(now > 0.0)) {
            record(c, next > 0.0 ? std::numeric_limits<double>::infinity() : -1.0, eps, k);
            continue;
        }
        record(c, (next - now) / now, eps, k);
    }
    return c;
}

InequalityCheck check_dini(const DiagnosticsSeries& s, double psi_2R, double R, double eps) {
    InequalityCheck c;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        const double dt = s.t[k + 1] - s.t[k];
        const double lhs = (s.d_X[k + 1] - s.d_X[k]) / dt;
        const double a = 2.0 / psi_2R * s.gamma[k];
        const double b = psi_2R * s.d_X[k];
        const double scale = a + b;
        const double excess = lhs - (a - b) - rounding_floor(R, dt);
        record(c, scale > 0.0 ? excess / scale : (excess > 0.0 ? std::numeric_limits<double>::infinity() : -1.0),
               eps, k);
    }
    return c;
}

InequalityCheck check_speed_bound(const DiagnosticsSeries& s, double psi_2R, double R, double eps) {
    InequalityCheck c;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double dt = k + 1 < s.size() ? s.t[k + 1] - s.t[k] : (k > 0 ? s.t[k] - s.t[k - 1] : 1.0);
        const double bound = (s.gamma[k] + s.d_X[k]) / psi_2R;
        const double excess = s.speed_max[k] - bound - rounding_floor(R, dt) * dt;
        record(c, bound > 0.0 ? excess / bound : (excess > 0.0 ? std::numeric_limits<double>::infinity() : -1.0),
               eps, k);
    }
    return c;
}

}  // namespace hkd
