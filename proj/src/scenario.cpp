#include "hkdelay/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hkdelay/errors.hpp"

namespace hkd {

using nlohmann::json;

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::simulate: return "simulate";
        case Experiment::certify: return "certify";
        case Experiment::meanfield: return "meanfield";
        case Experiment::sweep: return "sweep";
    }
    return "unknown";
}

namespace {

// Collects violations while walking the document; every accessor records
// a message and returns a fallback instead of throwing.
class Reader {
public:
    std::vector<std::string> violations;

    void fail(const std::string& msg) { violations.push_back(msg); }

    void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!obj.is_object()) return;
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) fail(join(path, it.key()) + ": unknown key");
    }

    const json* section(const json& root, const char* key, bool required) {
        if (!root.contains(key)) {
            if (required) fail(std::string(key) + ": missing section");
            return nullptr;
        }
        const json& s = root.at(key);
        if (!s.is_object()) {
            fail(std::string(key) + ": must be an object");
            return nullptr;
        }
        return &s;
    }

    std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required) {
        if (!obj.contains(key)) {
            if (required) fail(join(path, key) + ": missing");
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(join(path, key) + ": must be a number");
            return std::nullopt;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(join(path, key) + ": must be finite");
            return std::nullopt;
        }
        return d;
    }

    std::optional<std::size_t> count(const json& obj, const std::string& path, const char* key, bool required) {
        if (!obj.contains(key)) {
            if (required) fail(join(path, key) + ": missing");
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            fail(join(path, key) + ": must be a non-negative integer");
            return std::nullopt;
        }
        return static_cast<std::size_t>(v.get<long long>());
    }

    std::optional<std::string> text(const json& obj, const std::string& path, const char* key, bool required) {
        if (!obj.contains(key)) {
            if (required) fail(join(path, key) + ": missing");
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail(join(path, key) + ": must be a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<bool> boolean(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) return std::nullopt;
        const json& v = obj.at(key);
        if (!v.is_boolean()) {
            fail(join(path, key) + ": must be true or false");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    std::optional<std::vector<double>> numbers(const json& obj, const std::string& path, const char* key,
                                               bool required) {
        if (!obj.contains(key)) {
            if (required) fail(join(path, key) + ": missing");
            return std::nullopt;
        }
        return number_list(obj.at(key), join(path, key));
    }

    std::optional<std::vector<double>> number_list(const json& v, const std::string& where) {
        if (!v.is_array()) {
            fail(where + ": must be an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                fail(where + ": must contain finite numbers only");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    // Array of equal-length numeric rows, flattened.
    std::optional<std::vector<double>> rows(const json& v, const std::string& where, std::size_t& width,
                                            std::size_t& height) {
        if (!v.is_array() || v.empty()) {
            fail(where + ": must be a non-empty array of coordinate arrays");
            return std::nullopt;
        }
        std::vector<double> flat;
        width = 0;
        height = v.size();
        for (std::size_t r = 0; r < v.size(); ++r) {
            auto row = number_list(v[r], where + "[" + std::to_string(r) + "]");
            if (!row) return std::nullopt;
            if (r == 0) width = row->size();
            if (row->size() != width || width == 0) {
                fail(where + ": rows must be non-empty and of equal length");
                return std::nullopt;
            }
            flat.insert(flat.end(), row->begin(), row->end());
        }
        return flat;
    }

    template <class F>
    void guard(F&& f) {
        try {
            f();
        } catch (const ValidationError& e) {
            for (const auto& v : e.violations()) fail(v);
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }
};

void parse_kernel(Reader& rd, const json& s, ModelConfig& m) {
    rd.check_keys(s, "kernel", {"family", "exponent", "rate"});
    const auto fam = rd.text(s, "kernel", "family", true);
    if (!fam) return;
    if (*fam == "constant") {
        m.kernel = InfluenceKernel::constant();
    } else if (*fam == "power_law") {
        if (auto g = rd.number(s, "kernel", "exponent", true)) rd.guard([&] { m.kernel = InfluenceKernel::power_law(*g); });
    } else if (*fam == "exponential") {
        if (auto r = rd.number(s, "kernel", "rate", true)) rd.guard([&] { m.kernel = InfluenceKernel::exponential(*r); });
    } else {
        rd.fail("kernel.family: unknown family '" + *fam + "' (constant, power_law, exponential)");
    }
}

void parse_delay(Reader& rd, const json& s, ModelConfig& m) {
    rd.check_keys(s, "delay", {"family", "tau", "tau0", "tau_inf", "slope"});
    const auto fam = rd.text(s, "delay", "family", true);
    if (!fam) return;
    if (*fam == "constant") {
        if (auto t = rd.number(s, "delay", "tau", true)) rd.guard([&] { m.delay = DelayProfile::constant(*t); });
    } else if (*fam == "linear_decreasing") {
        auto t0 = rd.number(s, "delay", "tau0", true);
        auto ti = rd.number(s, "delay", "tau_inf", true);
        auto sl = rd.number(s, "delay", "slope", true);
        if (t0 && ti && sl) rd.guard([&] { m.delay = DelayProfile::linear_decreasing(*t0, *ti, *sl); });
    } else {
        rd.fail("delay.family: unknown family '" + *fam + "' (constant, linear_decreasing)");
    }
}

void parse_weight(Reader& rd, const json& s, ModelConfig& m) {
    rd.check_keys(s, "weight", {"family", "c", "rate", "coefficients"});
    const auto fam = rd.text(s, "weight", "family", true);
    if (!fam) return;
    if (*fam == "constant") {
        const auto c = rd.number(s, "weight", "c", false).value_or(1.0);
        rd.guard([&] { m.weight = MemoryWeight::constant(c); });
    } else if (*fam == "exponential") {
        if (auto r = rd.number(s, "weight", "rate", true)) rd.guard([&] { m.weight = MemoryWeight::exponential(*r); });
    } else if (*fam == "polynomial") {
        if (auto c = rd.numbers(s, "weight", "coefficients", true))
            rd.guard([&] { m.weight = MemoryWeight::polynomial(*c); });
    } else if (*fam == "dirac") {
        rd.fail("weight.family: " + std::string(kDiracWeightMessage));
    } else {
        rd.fail("weight.family: unknown family '" + *fam + "' (constant, exponential, polynomial)");
    }
}

MeasureFamily measure_family(Reader& rd, const std::string& name) {
    if (name == "uniform_interval") return MeasureFamily::uniform_interval;
    if (name == "gaussian_truncated") return MeasureFamily::gaussian_truncated;
    if (name == "two_clusters") return MeasureFamily::two_clusters;
    if (name == "explicit_points") return MeasureFamily::explicit_points;
    rd.fail("initial.family: unknown family '" + name +
            "' (uniform_interval, gaussian_truncated, two_clusters, explicit_points)");
    return MeasureFamily::uniform_interval;
}

void parse_initial(Reader& rd, const json& s, Scenario& sc, bool agents_given, bool dim_given) {
    const auto type = rd.text(s, "initial", "type", true);
    if (!type) return;
    if (*type == "constant") {
        rd.check_keys(s, "initial", {"type", "positions"});
        if (!s.contains("positions")) {
            rd.fail("initial.positions: missing");
            return;
        }
        std::size_t w = 0, h = 0;
        auto flat = rd.rows(s.at("positions"), "initial.positions", w, h);
        if (!flat) return;
        if (!agents_given) sc.model.agents = h;
        if (!dim_given) sc.model.dim = w;
        if (h != sc.model.agents) rd.fail("initial.positions: " + std::to_string(h) + " rows but model.agents = " +
                                          std::to_string(sc.model.agents));
        if (w != sc.model.dim) rd.fail("initial.positions: rows have " + std::to_string(w) +
                                       " coordinates but model.dim = " + std::to_string(sc.model.dim));
        rd.guard([&] { sc.history = InitialHistory::constant_per_agent(w, *flat); });
    } else if (*type == "sampled_path") {
        rd.check_keys(s, "initial", {"type", "times", "states"});
        auto times = rd.numbers(s, "initial", "times", true);
        if (!s.contains("states")) {
            rd.fail("initial.states: missing");
            return;
        }
        const json& st = s.at("states");
        if (!times) return;
        if (!st.is_array() || st.size() != times->size()) {
            rd.fail("initial.states: must hold one agents x dim array per entry of initial.times");
            return;
        }
        std::vector<std::vector<double>> states;
        std::size_t w = 0, h = 0;
        for (std::size_t k = 0; k < st.size(); ++k) {
            std::size_t wk = 0, hk = 0;
            auto flat = rd.rows(st[k], "initial.states[" + std::to_string(k) + "]", wk, hk);
            if (!flat) return;
            if (k == 0) {
                w = wk;
                h = hk;
            } else if (wk != w || hk != h) {
                rd.fail("initial.states: every sample must have the same shape");
                return;
            }
            states.push_back(std::move(*flat));
        }
        if (!agents_given) sc.model.agents = h;
        if (!dim_given) sc.model.dim = w;
        if (h != sc.model.agents) rd.fail("initial.states: " + std::to_string(h) + " agents but model.agents = " +
                                          std::to_string(sc.model.agents));
        if (w != sc.model.dim) rd.fail("initial.states: " + std::to_string(w) + " coordinates but model.dim = " +
                                       std::to_string(sc.model.dim));
        rd.guard([&] { sc.history = InitialHistory::sampled_path(w, *times, std::move(states)); });
    } else if (*type == "measure") {
        rd.check_keys(s, "initial", {"type", "family", "dim", "a", "b", "mean", "sd", "radius", "c1", "c2", "spread",
                                     "points", "constant_in_s", "quantile", "seed"});
        InitialMeasureSpec m;
        m.dim = rd.count(s, "initial", "dim", false).value_or(sc.model.dim);
        if (!dim_given) sc.model.dim = m.dim;
        if (m.dim != sc.model.dim) rd.fail("initial.dim: differs from model.dim");
        if (auto f = rd.text(s, "initial", "family", true)) m.family = measure_family(rd, *f);
        m.a = rd.number(s, "initial", "a", false).value_or(m.a);
        m.b = rd.number(s, "initial", "b", false).value_or(m.b);
        m.mean = rd.number(s, "initial", "mean", false).value_or(m.mean);
        m.sd = rd.number(s, "initial", "sd", false).value_or(m.sd);
        m.radius = rd.number(s, "initial", "radius", false).value_or(m.radius);
        m.spread = rd.number(s, "initial", "spread", false).value_or(m.spread);
        if (auto c = rd.numbers(s, "initial", "c1", false)) m.c1 = *c;
        else if (m.dim != 1) m.c1.assign(m.dim, -1.0);
        if (auto c = rd.numbers(s, "initial", "c2", false)) m.c2 = *c;
        else if (m.dim != 1) m.c2.assign(m.dim, 1.0);
        if (s.contains("points")) {
            std::size_t w = 0, h = 0;
            if (auto flat = rd.rows(s.at("points"), "initial.points", w, h)) {
                m.points = *flat;
                if (w != m.dim) rd.fail("initial.points: rows must have dim coordinates");
            }
        }
        m.constant_in_s = rd.boolean(s, "initial", "constant_in_s").value_or(true);
        m.quantile = rd.boolean(s, "initial", "quantile").value_or(m.dim == 1);
        if (s.contains("seed")) {
            const json& v = s.at("seed");
            if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))
                m.seed = v.get<std::uint64_t>();
            else
                rd.fail("initial.seed: must be a non-negative integer");
        }
        for (auto& v : m.validate()) rd.fail(v);
        sc.measure = m;
    } else {
        rd.fail("initial.type: unknown type '" + *type + "' (constant, sampled_path, measure)");
    }
}

Experiment parse_experiment(Reader& rd, const std::string& e) {
    if (e == "simulate") return Experiment::simulate;
    if (e == "certify") return Experiment::certify;
    if (e == "meanfield") return Experiment::meanfield;
    if (e == "sweep") return Experiment::sweep;
    rd.fail("experiment: unknown experiment '" + e + "' (simulate, certify, meanfield, sweep)");
    return Experiment::simulate;
}

}  // namespace

bool is_sweep_param(const std::string& name) {
    return name == "tau" || name == "dt" || name == "N" || name == "kernel_parameter";
}

InitialHistory Scenario::initial() const {
    if (history) return *history;
    if (!measure) throw ValidationError("initial: missing");
    return sample_particles(*measure, model.agents);
}

double Scenario::radius() const {
    if (history) return history->max_norm(model.delay.tau_zero(), model.dt);
    if (measure) return measure->support_radius();
    throw ValidationError("initial: missing");
}

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> v = model.validate();
    if (!history && !measure) v.push_back("initial: missing");
    if (history) {
        if (history->agents() != model.agents) v.push_back("initial: agent count differs from model.agents");
        if (history->dim() != model.dim) v.push_back("initial: dimension differs from model.dim");
        for (auto& e : history->validate(model.delay.tau_zero())) v.push_back("initial: " + e);
    }
    if (measure) {
        for (auto& e : measure->validate()) v.push_back(e);
        if (measure->dim != model.dim) v.push_back("initial.dim: differs from model.dim");
        if (measure->family == MeasureFamily::explicit_points && measure->dim > 0 && !measure->points.empty() &&
            model.agents % (measure->points.size() / measure->dim) != 0)
            v.push_back("model.agents: must be a multiple of the number of explicit points");
    }
    if (beta && !(*beta >= 0.0)) v.push_back("diagnostics.beta: must be >= 0");
    if (fit_window && !(fit_window->first >= 0.0 && fit_window->second > fit_window->first &&
                        fit_window->second <= model.t_end))
        v.push_back("diagnostics.fit_window: need 0 <= t_a < t_b <= t_end");
    if (experiment == Experiment::meanfield) {
        if (!measure) v.push_back("initial.type: meanfield needs an initial measure (type = measure)");
        if (meanfield_N.empty()) v.push_back("meanfield.N: list is empty");
        for (std::size_t k = 0; k < meanfield_N.size(); ++k) {
            if (meanfield_N[k] < 2) v.push_back("meanfield.N: every N must be >= 2");
            if (k && meanfield_N[k] <= meanfield_N[k - 1]) v.push_back("meanfield.N: must be increasing");
        }
        if (checkpoints.empty()) v.push_back("meanfield.checkpoints: list is empty");
        for (double t : checkpoints)
            if (!(t >= 0.0 && t <= model.t_end)) v.push_back("meanfield.checkpoints: values must lie in [0, t_end]");
    }
    if (experiment == Experiment::sweep) {
        if (!is_sweep_param(sweep_param))
            v.push_back("sweep.param: '" + sweep_param + "' is not sweepable (tau, dt, N, kernel_parameter)");
        if (sweep_values.empty()) v.push_back("sweep.values: list is empty");
    }
    return v;
}

Scenario parse_scenario(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("scenario: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ValidationError("scenario: top level must be an object");

    Reader rd;
    Scenario sc;
    rd.check_keys(root, "", {"schema_version", "name", "experiment", "model", "kernel", "delay", "weight", "initial",
                             "diagnostics", "meanfield", "sweep", "outputs"});
    if (auto v = rd.count(root, "", "schema_version", true); v && *v != static_cast<std::size_t>(kSchemaVersion))
        rd.fail("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " + std::to_string(*v));
    sc.name = rd.text(root, "", "name", false).value_or("");
    if (auto e = rd.text(root, "", "experiment", false)) sc.experiment = parse_experiment(rd, *e);

    bool agents_given = false, dim_given = false;
    if (const json* m = rd.section(root, "model", true)) {
        rd.check_keys(*m, "model", {"agents", "dim", "scheme", "dt", "t_end", "quadrature_nodes"});
        if (auto a = rd.count(*m, "model", "agents", false)) {
            sc.model.agents = *a;
            agents_given = true;
        }
        if (auto d = rd.count(*m, "model", "dim", false)) {
            sc.model.dim = *d;
            dim_given = true;
        }
        if (auto s = rd.text(*m, "model", "scheme", false)) {
            if (*s == "symmetric") sc.model.scheme = WeightScheme::symmetric;
            else if (*s == "normalized") sc.model.scheme = WeightScheme::normalized;
            else rd.fail("model.scheme: unknown scheme '" + *s + "' (symmetric, normalized)");
        }
        if (auto dt = rd.number(*m, "model", "dt", true)) sc.model.dt = *dt;
        if (auto te = rd.number(*m, "model", "t_end", true)) sc.model.t_end = *te;
        if (auto q = rd.count(*m, "model", "quadrature_nodes", false)) sc.model.quadrature_nodes = *q;
    }
    if (const json* s = rd.section(root, "kernel", true)) parse_kernel(rd, *s, sc.model);
    if (const json* s = rd.section(root, "delay", true)) parse_delay(rd, *s, sc.model);
    if (const json* s = rd.section(root, "weight", true)) parse_weight(rd, *s, sc.model);
    if (const json* s = rd.section(root, "initial", true)) parse_initial(rd, *s, sc, agents_given, dim_given);

    if (const json* s = rd.section(root, "diagnostics", false)) {
        rd.check_keys(*s, "diagnostics", {"beta", "fit_window"});
        sc.beta = rd.number(*s, "diagnostics", "beta", false);
        if (auto w = rd.numbers(*s, "diagnostics", "fit_window", false)) {
            if (w->size() != 2) rd.fail("diagnostics.fit_window: must be [t_a, t_b]");
            else sc.fit_window = std::make_pair((*w)[0], (*w)[1]);
        }
    }
    if (const json* s = rd.section(root, "meanfield", false)) {
        rd.check_keys(*s, "meanfield", {"N", "checkpoints"});
        if (auto n = rd.numbers(*s, "meanfield", "N", false)) {
            for (double v : *n) {
                if (v < 0 || v != std::floor(v)) {
                    rd.fail("meanfield.N: entries must be non-negative integers");
                    break;
                }
                sc.meanfield_N.push_back(static_cast<std::size_t>(v));
            }
        }
        if (auto c = rd.numbers(*s, "meanfield", "checkpoints", false)) sc.checkpoints = *c;
    }
    if (const json* s = rd.section(root, "sweep", false)) {
        rd.check_keys(*s, "sweep", {"param", "values"});
        sc.sweep_param = rd.text(*s, "sweep", "param", false).value_or("");
        if (auto v = rd.numbers(*s, "sweep", "values", false)) sc.sweep_values = *v;
    }
    if (const json* s = rd.section(root, "outputs", false)) {
        rd.check_keys(*s, "outputs", {"trajectory", "diagnostics", "certificate", "meanfield", "sweep"});
        auto path = [&](const char* key, std::string& dst) {
            if (auto p = rd.text(*s, "outputs", key, false)) {
                if (p->find('/') != std::string::npos || *p == "." || *p == "..")
                    rd.fail(std::string("outputs.") + key + ": must be a plain file name inside --out-dir");
                else
                    dst = *p;
            }
        };
        path("trajectory", sc.outputs.trajectory);
        path("diagnostics", sc.outputs.diagnostics);
        path("certificate", sc.outputs.certificate);
        path("meanfield", sc.outputs.meanfield);
        path("sweep", sc.outputs.sweep);
    }

    for (auto& v : sc.validate()) rd.fail(v);
    if (!rd.violations.empty()) {
        // A section that failed to parse can cascade into duplicates.
        std::vector<std::string> unique;
        for (auto& v : rd.violations)
            if (std::find(unique.begin(), unique.end(), v) == unique.end()) unique.push_back(v);
        throw ValidationError(unique);
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("scenario: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

Scenario with_param(const Scenario& s, const std::string& param, double value) {
    Scenario out = s;
    if (param == "tau") {
        if (s.model.delay.family() == DelayFamily::constant)
            out.model.delay = DelayProfile::constant(value);
        else
            out.model.delay = s.model.delay.with_tau_zero(value);
    } else if (param == "dt") {
        out.model.dt = value;
    } else if (param == "N") {
        if (!(value >= 2.0 && value == std::floor(value)))
            throw ValidationError("sweep.values: N must be an integer >= 2");
        if (s.history) throw ValidationError("sweep.param: N can only be swept with an initial measure");
        out.model.agents = static_cast<std::size_t>(value);
    } else if (param == "kernel_parameter") {
        switch (s.model.kernel.family()) {
            case KernelFamily::power_law: out.model.kernel = InfluenceKernel::power_law(value); break;
            case KernelFamily::exponential: out.model.kernel = InfluenceKernel::exponential(value); break;
            case KernelFamily::constant:
                throw ValidationError("sweep.param: the constant kernel has no parameter");
        }
    } else {
        throw ValidationError("sweep.param: '" + param + "' is not sweepable (tau, dt, N, kernel_parameter)");
    }
    return out;
}

double observed_order(std::span<const double> coarse, std::span<const double> mid, std::span<const double> fine) {
    if (coarse.size() != mid.size() || mid.size() != fine.size())
        throw ValidationError("observed_order: states differ in size");
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        e1 = std::max(e1, std::abs(coarse[k] - mid[k]));
        e2 = std::max(e2, std::abs(mid[k] - fine[k]));
    }
    if (!(e2 > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log2(e1 / e2);
}

}  // namespace hkd
