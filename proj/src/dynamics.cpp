#include "hkdelay/dynamics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "hkdelay/errors.hpp"

namespace hkd {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = a[c] - b[c];
        s += d * d;
    }
    return std::sqrt(s);
}

void check_finite(std::span<const double> v, const char* what, double t) {
    for (std::size_t k = 0; k < v.size(); ++k)
        if (!std::isfinite(v[k]))
            throw NumericError(std::string("non-finite value in ") + what + " at t = " + num(t) + " (entry " +
                               std::to_string(k) + ")");
}

}  // namespace

std::string to_string(WeightScheme s) { return s == WeightScheme::symmetric ? "symmetric" : "normalized"; }

std::vector<std::string> ModelConfig::validate() const {
    std::vector<std::string> v;
    if (agents < 2) v.push_back("N: agent count must be >= 2, got " + std::to_string(agents));
    if (dim < 1) v.push_back("d: dimension must be >= 1");
    if (!(std::isfinite(t_end) && t_end > 0.0)) v.push_back("t_end: must be positive and finite, got " + num(t_end));
    const double tau_star = delay.tau_star();
    if (!(std::isfinite(dt) && dt > 0.0)) {
        v.push_back("dt: must be positive and finite, got " + num(dt));
    } else if (dt > tau_star / 20.0 * (1.0 + 1e-12)) {
        v.push_back("dt: must satisfy dt <= tau_star/20 = " + num(tau_star / 20.0) + ", got " + num(dt));
    }
    if (quadrature_nodes < 2) v.push_back("quadrature_nodes: need at least 2 trapezoid nodes");
    for (auto& w : validate_weight(weight, delay)) v.push_back(std::move(w));
    return v;
}

void ModelConfig::require_valid() const {
    auto v = validate();
    if (!v.empty()) throw ValidationError(std::move(v));
}

double comm_weight(WeightScheme scheme, const InfluenceKernel& kernel, std::span<const double> x_j_at_s,
                   std::span<const double> x_i_at_t, std::span<const double> all_x_at_s) {
    if (x_j_at_s.size() != x_i_at_t.size() || x_i_at_t.empty())
        throw ValidationError("comm_weight: points must share a non-zero dimension");
    const double psi_ij = kernel(distance(x_j_at_s, x_i_at_t));
    if (scheme == WeightScheme::symmetric) return psi_ij;
    const std::size_t d = x_i_at_t.size();
    if (all_x_at_s.empty() || all_x_at_s.size() % d != 0)
        throw ValidationError("comm_weight: normalized scheme needs every agent's state at s");
    const std::size_t n = all_x_at_s.size() / d;
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += kernel(distance(all_x_at_s.subspan(k * d, d), x_i_at_t));
    return static_cast<double>(n) * psi_ij / denom;
}

void rhs(double t, std::span<const double> x, const HistoryBuffer& history, const ModelConfig& config,
         std::span<double> out, RhsWorkspace& ws, const StageTail* tail) {
    const std::size_t n = config.agents;
    const std::size_t d = config.dim;
    const std::size_t w = n * d;
    if (x.size() != w || out.size() != w) throw ValidationError("rhs: state has wrong size");

    const double tau = config.delay(t);
    const double h = config.weight.integral(tau);
    assert(h > 0.0);
    const std::size_t m_nodes = config.quadrature_nodes;
    const double spacing = tau / static_cast<double>(m_nodes - 1);
    const double window_start = t - tau;
    if (history.empty() || history.t_front() > window_start)
        throw OutOfRangeError("rhs: history does not cover [" + num(window_start) + ", " + num(t) + "]");

    std::fill(out.begin(), out.end(), 0.0);
    if (ws.scratch.size() < n) ws.scratch.resize(n);
    ws.weighted.resize(d);
    const auto& table = simd::kernels();
    const double scale_normalized = static_cast<double>(n);

    for (std::size_t m = 0; m < m_nodes; ++m) {
        const bool last = m + 1 == m_nodes;
        const double s = last ? t : window_start + static_cast<double>(m) * spacing;
        const double lag = last ? 0.0 : tau - static_cast<double>(m) * spacing;
        double qw = spacing * config.weight(lag);
        if (m == 0 || last) qw *= 0.5;
        if (qw == 0.0) continue;

        history.sample_into(s, ws.delayed, tail);
        const simd::PointsView pts = ws.delayed.view();
        for (std::size_t i = 0; i < n; ++i) {
            double psi_total = 0.0;
            table.interaction(config.kernel, pts, x.data() + i * d, i, ws.scratch.data(), ws.weighted.data(),
                              &psi_total);
            const double f = config.scheme == WeightScheme::symmetric ? qw : qw * scale_normalized / psi_total;
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] += f * ws.weighted[c];
        }
    }
    const double norm = 1.0 / (static_cast<double>(n) * h);
    for (double& v : out) v *= norm;
}

std::vector<double> rhs(double t, std::span<const double> x, const HistoryBuffer& history,
                        const ModelConfig& config, const StageTail* tail) {
    std::vector<double> out(x.size());
    RhsWorkspace ws;
    rhs(t, x, history, config, out, ws, tail);
    return out;
}

double max_speed(std::span<const double> velocity, std::size_t dim) {
    double best = 0.0;
    for (std::size_t i = 0; i + dim <= velocity.size(); i += dim) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim; ++c) s += velocity[i + c] * velocity[i + c];
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

StepResult step(double t, std::span<const double> x, std::span<const double> velocity,
                const HistoryBuffer& history, const ModelConfig& config, RhsWorkspace& ws) {
    const double dt = config.dt;
    const std::size_t w = x.size();
    // Delayed lookups never reach past the step: the window start t - tau >=
    // t - tau(0) is covered, and the window end is the stage itself.
    assert(dt < config.delay.tau_star());
    if (history.empty() || history.t_back() != t)
        throw OrderingError("step: history must end at the current time " + num(t));

    std::vector<double> stage(w), k2(w), k3(w), k4(w);
    auto eval = [&](double ts, double c, std::span<const double> k, std::vector<double>& out, const char* name) {
        for (std::size_t i = 0; i < w; ++i) stage[i] = x[i] + c * dt * k[i];
        check_finite(stage, name, ts);
        const StageTail tail{ts, stage};
        rhs(ts, stage, history, config, out, ws, &tail);
        check_finite(out, name, ts);
    };
    eval(t + 0.5 * dt, 0.5, velocity, k2, "RK stage 2");
    eval(t + 0.5 * dt, 0.5, k2, k3, "RK stage 3");
    eval(t + dt, 1.0, k3, k4, "RK stage 4");

    StepResult r;
    r.x_next.resize(w);
    for (std::size_t i = 0; i < w; ++i)
        r.x_next[i] = x[i] + dt / 6.0 * (velocity[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    check_finite(r.x_next, "RK update", t + dt);

    r.velocity_next.resize(w);
    const StageTail tail{t + dt, r.x_next};
    rhs(t + dt, r.x_next, history, config, r.velocity_next, ws, &tail);
    check_finite(r.velocity_next, "velocity", t + dt);
    r.speed_max_next = max_speed(r.velocity_next, config.dim);
    return r;
}

std::vector<double> Trajectory::state_at(double t) const {
    if (times.empty() || t < times.front() || t > times.back())
        throw OutOfRangeError("trajectory queried at t = " + num(t) + " outside its time span");
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t w = agents * dim;
    if (it == times.end()) {
        auto s = state(times.size() - 1);
        return {s.begin(), s.end()};
    }
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    auto a = state(k);
    auto b = state(k + 1);
    const double lam = (t - times[k]) / (times[k + 1] - times[k]);
    std::vector<double> out(w);
    for (std::size_t i = 0; i < w; ++i) out[i] = a[i] + lam * (b[i] - a[i]);
    return out;
}

void Trajectory::write_csv(std::ostream& os) const {
    os << "t,agent";
    for (std::size_t c = 0; c < dim; ++c) os << ",x_" << (c + 1);
    os << ",speed_max\n";
    char buf[64];
    for (std::size_t k = origin; k < times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", times[k]);
        const std::string tstr = buf;
        std::snprintf(buf, sizeof buf, "%.17g", speed_max[k]);
        const std::string sstr = buf;
        auto s = state(k);
        for (std::size_t i = 0; i < agents; ++i) {
            os << tstr << ',' << i;
            for (std::size_t c = 0; c < dim; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", s[i * dim + c]);
                os << ',' << buf;
            }
            os << ',' << sstr << '\n';
        }
    }
}

std::vector<double> seed_times(const InitialHistory& initial, double tau0, double dt) {
    std::vector<double> ts;
    const double start = initial.start();
    // Grid reaches one step past -tau(0) when the data allows it.
    const auto k_max = static_cast<std::size_t>(std::ceil(tau0 / dt - 1e-9)) + 1;
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double s = -static_cast<double>(k) * dt;
        if (s < start) break;
        ts.push_back(s);
    }
    if (initial.kind() == InitialHistory::Kind::sampled_path) {
        for (double s : initial.times())
            if (s <= 0.0) ts.push_back(s);
        ts.push_back(start);
    }
    std::sort(ts.begin(), ts.end());
    std::vector<double> out;
    for (double s : ts) {
        if (!out.empty() && s - out.back() <= 1e-12 * std::max(1.0, std::abs(s))) {
            // Prefer exact grid/sample values: keep 0 exactly.
            if (s == 0.0) out.back() = 0.0;
            continue;
        }
        out.push_back(s);
    }
    return out;
}

Trajectory simulate(const ModelConfig& config, const InitialHistory& initial, double radius_tolerance,
                    const StepObserver& observer) {
    config.require_valid();
    {
        std::vector<std::string> v = initial.validate(config.delay.tau_zero());
        if (initial.agents() != config.agents)
            v.push_back("initial: history has " + std::to_string(initial.agents()) + " agents but N = " +
                        std::to_string(config.agents));
        if (initial.dim() != config.dim)
            v.push_back("initial: history has dimension " + std::to_string(initial.dim()) + " but d = " +
                        std::to_string(config.dim));
        if (!v.empty()) throw ValidationError(std::move(v));
    }
    const std::size_t n = config.agents;
    const std::size_t d = config.dim;
    const std::size_t w = n * d;
    const double tau0 = config.delay.tau_zero();
    const double dt = config.dt;

    Trajectory traj;
    traj.agents = n;
    traj.dim = d;
    traj.radius = initial.max_norm(tau0, dt);

    HistoryBuffer history(n, d, tau0, dt);
    const std::vector<double> seeds = seed_times(initial, tau0, dt);
    std::vector<double> buf(w);
    for (double s : seeds) {
        if (s == 0.0) break;
        initial.positions_at(s, buf);
        const double sp = initial.speed_max_at(s);
        history.append(s, buf, sp);
        traj.times.push_back(s);
        traj.states.insert(traj.states.end(), buf.begin(), buf.end());
        traj.speed_max.push_back(sp);
    }

    RhsWorkspace ws;
    std::vector<double> x = initial.positions_at(0.0);
    std::vector<double> v(w);
    {
        const StageTail tail{0.0, x};
        rhs(0.0, x, history, config, v, ws, &tail);
        check_finite(v, "initial velocity", 0.0);
    }
    double speed = max_speed(v, d);
    history.append(0.0, x, speed);
    traj.origin = traj.times.size();
    traj.times.push_back(0.0);
    traj.states.insert(traj.states.end(), x.begin(), x.end());
    traj.speed_max.push_back(speed);

    auto check_radius = [&](double t, std::span<const double> state) {
        for (std::size_t i = 0; i < n; ++i) {
            double s2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) s2 += state[i * d + c] * state[i * d + c];
            const double r = std::sqrt(s2);
            if (r > traj.radius + radius_tolerance)
                throw IntegratorAccuracyError("uniform bound violated at t = " + num(t) + ": |x_" +
                                                  std::to_string(i) + "| = " + num(r) + " > R = " +
                                                  num(traj.radius) + "; reduce dt",
                                              r - traj.radius);
        }
    };
    check_radius(0.0, x);
    if (observer) observer(0.0, x, history);

    const auto n_steps = static_cast<std::size_t>(std::ceil(config.t_end / dt - 1e-9));
    traj.times.reserve(traj.times.size() + n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        StepResult r = step(t, x, v, history, config, ws);
        const double t_next = static_cast<double>(k + 1) * dt;
        check_radius(t_next, r.x_next);
        history.append(t_next, r.x_next, r.speed_max_next);
        traj.times.push_back(t_next);
        traj.states.insert(traj.states.end(), r.x_next.begin(), r.x_next.end());
        traj.speed_max.push_back(r.speed_max_next);
        x = std::move(r.x_next);
        v = std::move(r.velocity_next);
        if (observer) observer(t_next, x, history);
    }
    return traj;
}

WeightAudit audit_weights(double t, std::span<const double> x, const HistoryBuffer& history,
                          const ModelConfig& config) {
    const std::size_t n = config.agents;
    const std::size_t d = config.dim;
    const double tau = config.delay(t);
    const std::size_t m_nodes = config.quadrature_nodes;
    const double spacing = tau / static_cast<double>(m_nodes - 1);
    WeightAudit a{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    std::vector<double> ys(n * d);
    for (std::size_t m = 0; m < m_nodes; ++m) {
        const double s = m + 1 == m_nodes ? t : t - tau + static_cast<double>(m) * spacing;
        history.sample(s, ys);
        for (std::size_t i = 0; i < n; ++i) {
            std::span<const double> xi = x.subspan(i * d, d);
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double aij =
                    comm_weight(config.scheme, config.kernel, std::span<const double>(ys).subspan(j * d, d), xi, ys);
                row += aij;
                a.min_weight = std::min(a.min_weight, aij);
                a.max_weight = std::max(a.max_weight, aij);
            }
            a.max_row_mean = std::max(a.max_row_mean, row / static_cast<double>(n));
        }
    }
    return a;
}

}  // namespace hkd
