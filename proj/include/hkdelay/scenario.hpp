#pragma once

// JSON scenario files and the experiment runner behind the command line.
// Schema (schema_version 1) is documented in README.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hkdelay/dynamics.hpp"
#include "hkdelay/history.hpp"
#include "hkdelay/meanfield.hpp"

namespace hkd {

inline constexpr int kSchemaVersion = 1;

enum class Experiment { simulate, certify, meanfield, sweep };

std::string to_string(Experiment e);

struct OutputPaths {
    std::string trajectory = "trajectory.csv";
    std::string diagnostics = "diagnostics.csv";
    std::string certificate = "certificate.json";
    std::string meanfield = "meanfield.jsonl";
    std::string sweep = "sweep.jsonl";
    /// Empty strings disable the corresponding artifact.
};

struct Scenario {
    std::string name;
    Experiment experiment = Experiment::simulate;
    ModelConfig model;
    /// Exactly one of these is set.
    std::optional<InitialHistory> history;
    std::optional<InitialMeasureSpec> measure;

    /// Lyapunov weight; defaults to the certificate's choice.
    std::optional<double> beta;
    /// Decay-rate fit window, defaults to [t_end/2, t_end].
    std::optional<std::pair<double, double>> fit_window;

    std::vector<std::size_t> meanfield_N;
    std::vector<double> checkpoints;

    std::string sweep_param;
    std::vector<double> sweep_values;

    OutputPaths outputs;

    /// Initial data for a run with the model's agent count.
    InitialHistory initial() const;
    /// Radius used by the certificate: initial-path maximum, or the stated
    /// support radius of a measure.
    double radius() const;
    /// Cross-field checks that need more than one section. Empty when valid.
    std::vector<std::string> validate() const;
};

/// Parses and validates; throws ValidationError listing every violation.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Names accepted by sweep: tau, dt, N, kernel_parameter.
bool is_sweep_param(const std::string& name);
/// Copy of s with one scalar replaced; throws ValidationError on bad values.
Scenario with_param(const Scenario& s, const std::string& param, double value);

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    /// 0: HKD_THREADS or hardware concurrency.
    std::size_t threads = 0;
};

/// Runs the scenario's experiment (or `override_experiment`). Returns the
/// process exit status: 0 success, 2 validation, 3 numeric failure.
int run_scenario_file(const std::filesystem::path& scenario_path, std::optional<Experiment> override_experiment,
                      const RunOptions& options, std::optional<std::string> sweep_param = std::nullopt,
                      std::optional<std::vector<double>> sweep_values = std::nullopt);

/// Observed convergence order from results at dt, dt/2, dt/4:
/// log2(|a - b| / |b - c|) in the max norm.
double observed_order(std::span<const double> coarse, std::span<const double> mid, std::span<const double> fine);

}  // namespace hkd
