#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hkdelay/errors.hpp"
#include "hkdelay/scenario.hpp"

using namespace hkd;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(HKD_SOURCE_DIR) / "scenarios";

std::vector<std::string> violations_of(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ValidationError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

const char* kPair = R"({
  "schema_version": 1,
  "model": {"agents": 2, "dim": 1, "dt": 0.0125, "t_end": 1.0},
  "kernel": {"family": "constant"},
  "delay": {"family": "constant", "tau": 0.25},
  "weight": {"family": "constant"},
  "initial": {"type": "constant", "positions": [[0.0], [1.0]]}
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hkd_scenario_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("bundled scenarios parse as documented") {
    const auto pair = load_scenario(kScenarios / "certified_pair.json");
    CHECK(pair.name == "certified_pair");
    CHECK(pair.experiment == Experiment::simulate);
    CHECK(pair.model.agents == 2);
    CHECK(pair.model.delay.tau_star() == 0.25);
    CHECK(pair.radius() == 1.0);
    REQUIRE(pair.history.has_value());

    const auto mf = load_scenario(kScenarios / "meanfield_uniform.json");
    CHECK(mf.experiment == Experiment::meanfield);
    REQUIRE(mf.measure.has_value());
    CHECK(mf.meanfield_N == std::vector<std::size_t>{50, 100, 200, 400});
    CHECK(mf.checkpoints == std::vector<double>{1.0, 2.5, 5.0});

    const auto sw = load_scenario(kScenarios / "dt_sweep.json");
    CHECK(sw.sweep_param == "dt");
    CHECK(sw.sweep_values.size() == 3);

    for (const char* ok : {"planar_power_law.json", "tau_sweep.json", "uncertified_pair.json"})
        CHECK_NOTHROW(load_scenario(kScenarios / ok));
    CHECK_THROWS_AS(load_scenario(kScenarios / "bad_dt.json"), ValidationError);
    CHECK_THROWS_AS(load_scenario(kScenarios / "dirac_weight.json"), ValidationError);
    CHECK_THROWS_AS(load_scenario(kScenarios / "missing.json"), ValidationError);
}

TEST_CASE("parse errors name the offending fields") {
    CHECK(violations_of(kPair).empty());

    auto edit = [](std::string text, const std::string& from, const std::string& to) {
        text.replace(text.find(from), from.size(), to);
        return text;
    };
    CHECK(mentions(violations_of(edit(kPair, "\"dt\": 0.0125", "\"dt\": 0.25")), "dt"));
    const std::string dirac = edit(kPair, "\"weight\": {\"family\": \"constant\"}", "\"weight\": {\"family\": \"dirac\"}");
    CHECK(mentions(violations_of(dirac), "weight.family"));
    CHECK(mentions(violations_of(edit(kPair, "\"schema_version\": 1", "\"schema_version\": 2")), "schema_version"));
    CHECK(mentions(violations_of(edit(kPair, "\"t_end\": 1.0", "\"t_end\": 1.0, \"colour\": 3")), "model.colour"));
    CHECK(mentions(violations_of(edit(kPair, "[[0.0], [1.0]]", "[[0.0], [1.0], [2.0]]")), "initial.positions"));
    CHECK(mentions(violations_of("{"), "JSON"));

    // Several problems at once are all listed.
    const auto many = violations_of(edit(edit(kPair, "\"dt\": 0.0125", "\"dt\": 0.25"), "\"tau\": 0.25", "\"tau\": -1"));
    CHECK(many.size() >= 2);
    CHECK(mentions(many, "dt"));
    CHECK(mentions(many, "delay"));
}

TEST_CASE("measure initial data") {
    const std::string text = R"({
      "schema_version": 1,
      "experiment": "meanfield",
      "model": {"dim": 1, "dt": 0.0125, "t_end": 1.0},
      "kernel": {"family": "constant"},
      "delay": {"family": "constant", "tau": 0.25},
      "weight": {"family": "constant"},
      "initial": {"type": "measure", "family": "uniform_interval", "a": 0.0, "b": 2.0, "constant_in_s": false},
      "meanfield": {"N": [10, 20], "checkpoints": [0.5]}
    })";
    CHECK(mentions(violations_of(text), "sampled_path"));
    std::string fixed = text;
    fixed.replace(fixed.find(", \"constant_in_s\": false"), 24, "");
    const auto sc = parse_scenario(fixed);
    CHECK(sc.radius() == 2.0);
    CHECK(sc.measure->quantile);
}

TEST_CASE("sweep parameters") {
    const auto sc = parse_scenario(kPair);
    CHECK(is_sweep_param("tau"));
    CHECK(!is_sweep_param("agents"));
    CHECK(with_param(sc, "tau", 0.1).model.delay.tau_star() == 0.1);
    CHECK(with_param(sc, "dt", 0.001).model.dt == 0.001);
    CHECK_THROWS_AS(with_param(sc, "kernel_parameter", 2.0), ValidationError);
    CHECK_THROWS_AS(with_param(sc, "N", 4.0), ValidationError);
    CHECK_THROWS_AS(with_param(sc, "colour", 1.0), ValidationError);
}

TEST_CASE("observed order") {
    const std::vector<double> exact{1.0, 2.0};
    auto approx = [&](double h) { return std::vector<double>{1.0 + h * h, 2.0 - 3.0 * h * h}; };
    CHECK(observed_order(approx(0.1), approx(0.05), approx(0.025)) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(observed_order(exact, exact, exact) == std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(observed_order(exact, exact, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("run_scenario_file exit codes and determinism") {
    RunOptions o;
    o.quiet = true;
    o.out_dir = scratch("a");
    CHECK(run_scenario_file(kScenarios / "certified_pair.json", std::nullopt, o) == 0);
    for (const char* f : {"trajectory.csv", "diagnostics.csv", "certificate.json"}) CHECK(fs::exists(o.out_dir / f));
    CHECK(slurp(o.out_dir / "certificate.json").find("\"holds\":true") != std::string::npos);

    RunOptions o2 = o;
    o2.out_dir = scratch("b");
    CHECK(run_scenario_file(kScenarios / "certified_pair.json", std::nullopt, o2) == 0);
    for (const char* f : {"trajectory.csv", "diagnostics.csv", "certificate.json"})
        CHECK(slurp(o.out_dir / f) == slurp(o2.out_dir / f));

    CHECK(run_scenario_file(kScenarios / "bad_dt.json", std::nullopt, o) == 2);
    CHECK(run_scenario_file(kScenarios / "dirac_weight.json", std::nullopt, o) == 2);
    CHECK(run_scenario_file(kScenarios / "tau_sweep.json", std::nullopt, o, std::nullopt, std::vector<double>{}) == 2);
    CHECK(run_scenario_file(kScenarios / "tau_sweep.json", std::nullopt, o, std::string("agents")) == 2);

    o.out_dir = scratch("c");
    CHECK(run_scenario_file(kScenarios / "uncertified_pair.json", std::nullopt, o) == 0);
    CHECK(slurp(o.out_dir / "certificate.json").find("\"holds\":false") != std::string::npos);

    o.out_dir = scratch("d");
    CHECK(run_scenario_file(kScenarios / "tau_sweep.json", std::nullopt, o, std::nullopt,
                            std::vector<double>{0.2, 0.3}) == 0);
    const auto rows = slurp(o.out_dir / "sweep.jsonl");
    CHECK(rows.find("\"value\":0.20000000000000001,\"holds\":true") != std::string::npos);
    CHECK(rows.find("\"value\":0.29999999999999999,\"holds\":false") != std::string::npos);

    fs::remove_all(scratch("a"));
    fs::remove_all(scratch("b"));
    fs::remove_all(scratch("c"));
    fs::remove_all(scratch("d"));
}
