#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <atomic>
#include <thread>

#include <json.hpp>

#include "hkdelay/diagnostics.hpp"
#include "hkdelay/errors.hpp"
#include "hkdelay/scenario.hpp"

namespace hkd {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

std::string num(double v) {
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : "null"; }

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const UnsupportedInstance*>(&e) || dynamic_cast<const SizeError*>(&e))
        return kExitValidation;
    return kExitNumeric;
}

void report_error(const std::exception& e) {
    if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
        std::cerr << "validation failed:\n";
        for (const auto& m : v->violations()) std::cerr << "  " << m << '\n';
        return;
    }
    if (exit_code_for(e) == kExitNumeric)
        std::cerr << "numeric failure: " << e.what() << '\n';
    else
        std::cerr << "error: " << e.what() << '\n';
}

template <class Writer>
void write_artifact(const fs::path& dir, const std::string& name, Writer&& w) {
    if (name.empty()) return;
    const fs::path p = dir / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("--out-dir: cannot write '" + p.string() + "'");
    w(os);
    if (!os) throw ValidationError("--out-dir: write to '" + p.string() + "' failed");
}

std::pair<double, double> fit_window(const Scenario& sc) {
    return sc.fit_window.value_or(std::make_pair(0.5 * sc.model.t_end, sc.model.t_end));
}

std::string cert_summary(const ConsensusCertificate& c) {
    return std::string("holds=") + (c.holds ? "true" : "false") + " K=" + opt(c.K);
}

int run_certify(const Scenario& sc, const RunOptions& o) {
    const auto cert = certify(sc.model.kernel, sc.model.delay, sc.model.weight, sc.radius());
    write_artifact(o.out_dir, sc.outputs.certificate, [&](std::ostream& os) { os << cert.to_json() << '\n'; });
    if (!o.quiet) std::cout << "certify " << cert_summary(cert) << " R=" << num(cert.R) << '\n';
    return kExitOk;
}

int run_simulate(const Scenario& sc, const RunOptions& o) {
    const auto cert = certify(sc.model.kernel, sc.model.delay, sc.model.weight, sc.radius());
    const Trajectory traj = simulate(sc.model, sc.initial());
    std::optional<double> beta = sc.beta ? sc.beta : cert.beta_chosen;
    const DiagnosticsSeries series = compute_series(traj, sc.model, beta);
    const auto [ta, tb] = fit_window(sc);
    const DecayFit fit = fit_decay_rate(series, ta, tb);

    write_artifact(o.out_dir, sc.outputs.trajectory, [&](std::ostream& os) { traj.write_csv(os); });
    write_artifact(o.out_dir, sc.outputs.diagnostics, [&](std::ostream& os) { series.write_csv(os); });
    write_artifact(o.out_dir, sc.outputs.certificate, [&](std::ostream& os) { os << cert.to_json() << '\n'; });
    if (!o.quiet)
        std::cout << "simulate " << cert_summary(cert) << " fitted_rate=" << num(fit.rate)
                  << " final_dX=" << num(series.d_X.back()) << '\n';
    return kExitOk;
}

int run_meanfield(const Scenario& sc, const RunOptions& o) {
    ConvergenceOptions co;
    co.threads = o.threads;
    const auto report = convergence_experiment(*sc.measure, sc.model, sc.meanfield_N, sc.checkpoints, co);
    write_artifact(o.out_dir, sc.outputs.meanfield, [&](std::ostream& os) { report.write_jsonl(os); });
    write_artifact(o.out_dir, sc.outputs.certificate,
                   [&](std::ostream& os) { os << report.certificate.to_json() << '\n'; });
    if (!o.quiet)
        std::cout << "meanfield " << cert_summary(report.certificate)
                  << " distances_nonincreasing=" << (report.distances_nonincreasing ? "true" : "false")
                  << " decay_bound_holds=" << (report.decay_bound_holds ? "true" : "false")
                  << " runs_ok=" << (report.all_runs_ok ? "true" : "false") << '\n';
    return report.all_runs_ok ? kExitOk : kExitNumeric;
}

struct SweepRow {
    double value = 0.0;
    std::optional<bool> holds;
    std::optional<double> K;
    std::optional<double> fitted_rate;
    std::optional<double> final_dX;
    std::vector<double> final_state;
    std::string error;
};

SweepRow sweep_one(const Scenario& base, const std::string& param, double value) {
    SweepRow row;
    row.value = value;
    try {
        const Scenario sc = with_param(base, param, value);
        // The certificate needs only kernel, delay and weight, so it is
        // reported even when the run itself is rejected.
        const auto cert = certify(sc.model.kernel, sc.model.delay, sc.model.weight, sc.radius());
        row.holds = cert.holds;
        row.K = cert.K;
        if (auto v = sc.validate(); !v.empty()) throw ValidationError(v);
        const Trajectory traj = simulate(sc.model, sc.initial());
        std::vector<double> t, dx;
        for (std::size_t k = traj.origin; k < traj.size(); ++k) {
            t.push_back(traj.times[k]);
            dx.push_back(diameter(traj.state(k), traj.dim));
        }
        const auto [ta, tb] = fit_window(sc);
        row.fitted_rate = fit_decay_rate(t, dx, ta, tb).rate;
        row.final_state = traj.state_at(sc.model.t_end);
        row.final_dX = diameter(row.final_state, traj.dim);
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

int run_sweep(const Scenario& sc, const RunOptions& o) {
    const auto& values = sc.sweep_values;
    std::vector<SweepRow> rows(values.size());
    const std::size_t workers = worker_count(o.threads, values.size());
    {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t k = next++; k < values.size(); k = next++) rows[k] = sweep_one(sc, sc.sweep_param, values[k]);
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
        for (auto& th : pool) th.join();
    }

    std::optional<double> order;
    if (sc.sweep_param == "dt" && rows.size() >= 3) {
        std::vector<std::size_t> idx(rows.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] > values[b]; });
        for (std::size_t k = 0; k + 2 < idx.size(); ++k) {
            const auto &a = rows[idx[k]], &b = rows[idx[k + 1]], &c = rows[idx[k + 2]];
            if (!a.error.empty() || !b.error.empty() || !c.error.empty()) continue;
            const double r1 = a.value / b.value, r2 = b.value / c.value;
            if (std::abs(r1 - r2) > 1e-9 * r1) continue;
            const double p = observed_order(a.final_state, b.final_state, c.final_state) / std::log2(r1);
            order = order ? std::min(*order, p) : p;
        }
    }

    write_artifact(o.out_dir, sc.outputs.sweep, [&](std::ostream& os) {
        for (const auto& r : rows) {
            os << "{\"param\":" << quoted(sc.sweep_param) << ",\"value\":" << num(r.value) << ",\"holds\":"
               << (r.holds ? (*r.holds ? "true" : "false") : "null") << ",\"K\":" << opt(r.K)
               << ",\"fitted_rate\":" << opt(r.fitted_rate) << ",\"final_dX\":" << opt(r.final_dX)
               << ",\"error\":" << (r.error.empty() ? "null" : quoted(r.error)) << "}\n";
        }
        if (sc.sweep_param == "dt") os << "{\"summary\":\"observed_order\",\"order\":" << opt(order) << "}\n";
    });
    if (!o.quiet) {
        std::size_t failed = 0;
        for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
        std::cout << "sweep param=" << sc.sweep_param << " values=" << rows.size() << " failed=" << failed;
        if (order) std::cout << " observed_order=" << num(*order);
        std::cout << '\n';
    }
    return kExitOk;
}

}  // namespace

int run_scenario_file(const std::filesystem::path& scenario_path, std::optional<Experiment> override_experiment,
                      const RunOptions& options, std::optional<std::string> sweep_param,
                      std::optional<std::vector<double>> sweep_values) {
    try {
        Scenario sc = load_scenario(scenario_path);
        if (override_experiment) sc.experiment = *override_experiment;
        if (options.seed && sc.measure) sc.measure->seed = *options.seed;
        if (sweep_param) sc.sweep_param = *sweep_param;
        if (sweep_values) sc.sweep_values = *sweep_values;
        if (auto v = sc.validate(); !v.empty()) throw ValidationError(v);

        std::error_code ec;
        fs::create_directories(options.out_dir, ec);
        if (ec) throw ValidationError("--out-dir: cannot create '" + options.out_dir.string() + "': " + ec.message());

        switch (sc.experiment) {
            case Experiment::simulate: return run_simulate(sc, options);
            case Experiment::certify: return run_certify(sc, options);
            case Experiment::meanfield: return run_meanfield(sc, options);
            case Experiment::sweep: return run_sweep(sc, options);
        }
        return kExitValidation;
    } catch (const std::exception& e) {
        report_error(e);
        return exit_code_for(e);
    }
}

}  // namespace hkd
