// hkdelay: scenario-driven front end.
//
//   hkdelay simulate  --scenario s.json --out-dir out
//   hkdelay certify   --scenario s.json
//   hkdelay meanfield --scenario s.json --seed 7
//   hkdelay sweep     --scenario s.json --param tau --values 0.1,0.2,0.3
//   hkdelay run       --scenario s.json          (experiment named in the file)

#include <CLI11.hpp>

#include <iostream>

#include "hkdelay/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Opinion dynamics with distributed delay: simulation, consensus certificates, mean-field runs"};
    app.require_subcommand(1);

    std::string scenario;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool quiet = false;
    std::string param;
    std::vector<double> values;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", scenario, "Scenario file (JSON)")->required();
        sub->add_option("--out-dir", out_dir, "Directory for artifacts");
        sub->add_option("--seed", seed, "Seed for sampled initial measures");
        sub->add_flag("--quiet", quiet, "Suppress the summary line");
    };

    auto* sim = app.add_subcommand("simulate", "Integrate one scenario and write trajectory, diagnostics, certificate");
    auto* cert = app.add_subcommand("certify", "Evaluate the consensus condition only");
    auto* mf = app.add_subcommand("meanfield", "N-scaling convergence experiment");
    auto* sweep = app.add_subcommand("sweep", "Repeat a scenario over values of one parameter");
    auto* run = app.add_subcommand("run", "Run the experiment named in the scenario file");
    for (auto* s : {sim, cert, mf, sweep, run}) add_common(s);
    sweep->add_option("--param", param, "tau, dt, N or kernel_parameter");
    sweep->add_option("--values", values, "Comma separated values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    hkd::RunOptions opts;
    opts.out_dir = out_dir;
    opts.quiet = quiet;
    if (auto* sub = app.get_subcommands().front(); sub->count("--seed")) opts.seed = seed;

    std::optional<hkd::Experiment> experiment;
    std::optional<std::string> sweep_param;
    std::optional<std::vector<double>> sweep_values;
    if (*sim) experiment = hkd::Experiment::simulate;
    if (*cert) experiment = hkd::Experiment::certify;
    if (*mf) experiment = hkd::Experiment::meanfield;
    if (*sweep) {
        experiment = hkd::Experiment::sweep;
        if (sweep->count("--param")) sweep_param = param;
        if (sweep->count("--values")) sweep_values = values;
    }
    return hkd::run_scenario_file(scenario, experiment, opts, sweep_param, sweep_values);
}
