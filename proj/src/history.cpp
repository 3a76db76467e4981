#include "hkdelay/history.hpp"

#include <algorithm>
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

double norm(const double* x, std::size_t d) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += x[c] * x[c];
    return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// InitialHistory

InitialHistory InitialHistory::constant_per_agent(std::size_t dim, std::vector<double> positions) {
    if (dim == 0) throw ValidationError("initial: dimension must be >= 1");
    if (positions.empty() || positions.size() % dim != 0)
        throw ValidationError("initial.positions: expected a non-empty agents x dim array");
    for (double v : positions)
        if (!std::isfinite(v)) throw ValidationError("initial.positions: entries must be finite");
    InitialHistory h;
    h.kind_ = Kind::constant_per_agent;
    h.dim_ = dim;
    h.agents_ = positions.size() / dim;
    h.times_ = {0.0};
    h.states_ = {std::move(positions)};
    return h;
}

InitialHistory InitialHistory::sampled_path(std::size_t dim, std::vector<double> times,
                                            std::vector<std::vector<double>> states) {
    std::vector<std::string> v;
    if (dim == 0) v.push_back("initial: dimension must be >= 1");
    if (times.size() < 2) v.push_back("initial.times: a sampled path needs at least two samples");
    if (times.size() != states.size()) v.push_back("initial.states: one state per time stamp required");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) {
            v.push_back("initial.times: must be strictly increasing");
            break;
        }
    if (!v.empty()) throw ValidationError(std::move(v));
    const std::size_t width = states.front().size();
    if (width == 0 || width % dim != 0) throw ValidationError("initial.states: expected agents x dim arrays");
    for (const auto& s : states) {
        if (s.size() != width) throw ValidationError("initial.states: every sample needs the same agent count");
        for (double x : s)
            if (!std::isfinite(x)) throw ValidationError("initial.states: entries must be finite");
    }
    InitialHistory h;
    h.kind_ = Kind::sampled_path;
    h.dim_ = dim;
    h.agents_ = width / dim;
    h.times_ = std::move(times);
    h.states_ = std::move(states);
    return h;
}

double InitialHistory::start() const noexcept {
    return kind_ == Kind::constant_per_agent ? -std::numeric_limits<double>::infinity() : times_.front();
}

void InitialHistory::positions_at(double s, std::span<double> out) const {
    const std::size_t w = agents_ * dim_;
    if (out.size() != w) throw ValidationError("initial: output span has wrong size");
    if (kind_ == Kind::constant_per_agent) {
        std::copy(states_[0].begin(), states_[0].end(), out.begin());
        return;
    }
    if (!(s >= times_.front() && s <= times_.back()))
        throw OutOfRangeError("initial history queried at s = " + num(s) + " outside [" + num(times_.front()) +
                              ", " + num(times_.back()) + "]");
    auto it = std::upper_bound(times_.begin(), times_.end(), s);
    std::size_t k = static_cast<std::size_t>(it - times_.begin());
    if (k == times_.size()) {
        std::copy(states_.back().begin(), states_.back().end(), out.begin());
        return;
    }
    --k;
    const double lam = (s - times_[k]) / (times_[k + 1] - times_[k]);
    const auto& a = states_[k];
    const auto& b = states_[k + 1];
    for (std::size_t i = 0; i < w; ++i) out[i] = a[i] + lam * (b[i] - a[i]);
}

std::vector<double> InitialHistory::positions_at(double s) const {
    std::vector<double> out(agents_ * dim_);
    positions_at(s, out);
    return out;
}

double InitialHistory::speed_max_at(double s) const {
    if (kind_ == Kind::constant_per_agent) return 0.0;
    if (!(s >= times_.front() && s <= times_.back()))
        throw OutOfRangeError("initial history speed queried at s = " + num(s));
    auto it = std::upper_bound(times_.begin(), times_.end(), s);
    std::size_t k = static_cast<std::size_t>(it - times_.begin());
    k = std::min(k, times_.size() - 1);
    k = k == 0 ? 0 : k - 1;
    const double dt = times_[k + 1] - times_[k];
    double best = 0.0;
    for (std::size_t i = 0; i < agents_; ++i) {
        double s2 = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
            const double v = (states_[k + 1][i * dim_ + c] - states_[k][i * dim_ + c]) / dt;
            s2 += v * v;
        }
        best = std::max(best, std::sqrt(s2));
    }
    return best;
}

double InitialHistory::max_norm(double tau0, double spacing) const {
    if (agents_ == 0) throw ValidationError("initial: empty history");
    auto scan = [&](const std::vector<double>& x) {
        double best = 0.0;
        for (std::size_t i = 0; i < agents_; ++i) best = std::max(best, norm(&x[i * dim_], dim_));
        return best;
    };
    if (kind_ == Kind::constant_per_agent) return scan(states_[0]);
    double best = 0.0;
    // Piecewise-linear path: the norm is convex on each segment, so the
    // maximum over the window sits at a node or at a window end point. The
    // uniform grid is scanned as well.
    for (std::size_t k = 0; k < times_.size(); ++k)
        if (times_[k] >= -tau0 && times_[k] <= 0.0) best = std::max(best, scan(states_[k]));
    best = std::max(best, scan(positions_at(-tau0)));
    best = std::max(best, scan(positions_at(0.0)));
    if (spacing > 0.0) {
        const auto n = static_cast<std::size_t>(std::ceil(tau0 / spacing));
        for (std::size_t k = 0; k <= n; ++k) {
            const double s = std::min(0.0, -tau0 + static_cast<double>(k) * tau0 / static_cast<double>(n));
            best = std::max(best, scan(positions_at(s)));
        }
    }
    return best;
}

std::vector<std::string> InitialHistory::validate(double tau0) const {
    std::vector<std::string> v;
    if (agents_ < 1) v.push_back("initial: at least one agent required");
    if (kind_ == Kind::sampled_path) {
        if (times_.front() > -tau0 + 1e-12)
            v.push_back("initial.times: path starts at " + num(times_.front()) + " but must cover -tau(0) = " +
                        num(-tau0));
        if (std::abs(times_.back()) > 1e-12)
            v.push_back("initial.times: path must end at s = 0, got " + num(times_.back()));
    }
    return v;
}

// ---------------------------------------------------------------------------
// HistoryBuffer

HistoryBuffer::HistoryBuffer(std::size_t agents, std::size_t dim, double window, double dt)
    : agents_(agents), dim_(dim), window_(window), dt_(dt) {
    if (agents == 0 || dim == 0) throw ValidationError("history: agents and dim must be >= 1");
    if (!(window > 0.0) || !(dt > 0.0)) throw ValidationError("history: window and dt must be positive");
}

double HistoryBuffer::t_front() const {
    if (empty()) throw OutOfRangeError("history is empty");
    return times_[head_];
}

double HistoryBuffer::t_back() const {
    if (empty()) throw OutOfRangeError("history is empty");
    return times_.back();
}

std::span<const double> HistoryBuffer::state(std::size_t k) const {
    const std::size_t w = agents_ * dim_;
    return {states_.data() + (head_ + k) * w, w};
}

void HistoryBuffer::append(double t, std::span<const double> state, double speed_max) {
    const std::size_t w = agents_ * dim_;
    if (state.size() != w) throw ValidationError("history.append: state has wrong size");
    if (!std::isfinite(t)) throw OrderingError("history.append: non-finite time stamp");
    if (!empty() && !(t > times_.back()))
        throw OrderingError("history.append: time " + num(t) + " is not after last stamp " + num(times_.back()));
    for (double x : state)
        if (!std::isfinite(x)) throw NumericError("history.append: non-finite state at t = " + num(t));
    times_.push_back(t);
    states_.insert(states_.end(), state.begin(), state.end());
    speeds_.push_back(speed_max);

    // Drop a stamp only when its successor still lies at or before the cutoff.
    const double cutoff = t - window_ - 2.0 * dt_;
    while (times_.size() - head_ >= 2 && times_[head_ + 1] <= cutoff) ++head_;
    compact();
}

void HistoryBuffer::compact() {
    if (head_ < 256 || head_ * 2 < times_.size()) return;
    const std::size_t w = agents_ * dim_;
    times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(head_));
    speeds_.erase(speeds_.begin(), speeds_.begin() + static_cast<std::ptrdiff_t>(head_));
    states_.erase(states_.begin(), states_.begin() + static_cast<std::ptrdiff_t>(head_ * w));
    head_ = 0;
}

std::size_t HistoryBuffer::locate(double s) const {
    auto first = times_.begin() + static_cast<std::ptrdiff_t>(head_);
    auto it = std::upper_bound(first, times_.end(), s);
    if (it == times_.end()) return times_.size() - 1;
    return static_cast<std::size_t>(it - times_.begin()) - 1;
}

void HistoryBuffer::sample(double s, std::span<double> out, const StageTail* tail) const {
    const std::size_t w = agents_ * dim_;
    if (out.size() != w) throw ValidationError("history.sample: output span has wrong size");
    if (empty()) throw OutOfRangeError("history.sample: buffer is empty");
    const double lo = times_[head_];
    const double hi = times_.back();
    if (tail && s > hi) {
        if (!(s <= tail->t))
            throw OutOfRangeError("history.sample: s = " + num(s) + " beyond stage time " + num(tail->t));
        const double lam = (s - hi) / (tail->t - hi);
        const double* a = states_.data() + (times_.size() - 1) * w;
        for (std::size_t i = 0; i < w; ++i) out[i] = a[i] + lam * (tail->state[i] - a[i]);
        return;
    }
    if (!(s >= lo && s <= hi))
        throw OutOfRangeError("history.sample: s = " + num(s) + " outside covered interval [" + num(lo) + ", " +
                              num(hi) + "]");
    const std::size_t k = locate(s);
    const double* a = states_.data() + k * w;
    if (k + 1 == times_.size() || s == times_[k]) {
        std::copy(a, a + w, out.begin());
        return;
    }
    const double* b = a + w;
    const double lam = (s - times_[k]) / (times_[k + 1] - times_[k]);
    for (std::size_t i = 0; i < w; ++i) out[i] = a[i] + lam * (b[i] - a[i]);
}

std::vector<double> HistoryBuffer::sample(double s, const StageTail* tail) const {
    std::vector<double> out(agents_ * dim_);
    sample(s, out, tail);
    return out;
}

void HistoryBuffer::sample_into(double s, simd::PointCloud& out, const StageTail* tail) const {
    const std::size_t w = agents_ * dim_;
    if (out.count() != agents_ || out.dim() != dim_) out.resize(agents_, dim_);
    if (empty()) throw OutOfRangeError("history.sample: buffer is empty");
    const double lo = times_[head_];
    const double hi = times_.back();
    const double* a = nullptr;
    const double* b = nullptr;
    double lam = 0.0;
    if (tail && s > hi) {
        if (!(s <= tail->t))
            throw OutOfRangeError("history.sample: s = " + num(s) + " beyond stage time " + num(tail->t));
        a = states_.data() + (times_.size() - 1) * w;
        b = tail->state.data();
        lam = (s - hi) / (tail->t - hi);
    } else {
        if (!(s >= lo && s <= hi))
            throw OutOfRangeError("history.sample: s = " + num(s) + " outside covered interval [" + num(lo) +
                                  ", " + num(hi) + "]");
        const std::size_t k = locate(s);
        a = states_.data() + k * w;
        if (k + 1 < times_.size() && s != times_[k]) {
            b = a + w;
            lam = (s - times_[k]) / (times_[k + 1] - times_[k]);
        }
    }
    for (std::size_t c = 0; c < dim_; ++c) {
        double* dst = out.coord(c);
        if (b == nullptr) {
            for (std::size_t j = 0; j < agents_; ++j) dst[j] = a[j * dim_ + c];
        } else {
            for (std::size_t j = 0; j < agents_; ++j) {
                const double x0 = a[j * dim_ + c];
                dst[j] = x0 + lam * (b[j * dim_ + c] - x0);
            }
        }
    }
}

double HistoryBuffer::speed_max_at(double s) const {
    if (empty()) throw OutOfRangeError("history.speed: buffer is empty");
    if (!(s >= times_[head_] && s <= times_.back()))
        throw OutOfRangeError("history.speed: s = " + num(s) + " outside covered interval");
    const std::size_t k = locate(s);
    if (k + 1 == times_.size() || s == times_[k]) return speeds_[k];
    const double lam = (s - times_[k]) / (times_[k + 1] - times_[k]);
    return speeds_[k] + lam * (speeds_[k + 1] - speeds_[k]);
}

void HistoryBuffer::write_csv(std::ostream& os) const {
    os << "t,agent";
    for (std::size_t c = 0; c < dim_; ++c) os << ",x_" << (c + 1);
    os << '\n';
    char buf[64];
    for (std::size_t k = head_; k < times_.size(); ++k) {
        for (std::size_t i = 0; i < agents_; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", times_[k]);
            os << buf << ',' << i;
            for (std::size_t c = 0; c < dim_; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", states_[(k * agents_ + i) * dim_ + c]);
                os << ',' << buf;
            }
            os << '\n';
        }
    }
}

}  // namespace hkd
