// Scenario-driven front end: run a simulation scenario, verify a finished
// run from its artifacts, list bundled scenarios, or export plot data.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nsm/errors.hpp"
#include "nsm/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int print_report(const nsm::RunReport& rep, bool strict,
                 const std::vector<std::string>& warnings) {
  for (const auto& c : rep.checks) {
    std::printf("%-32s %-4s value=%.6g threshold=%.6g %s\n", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.value, c.threshold, c.detail.c_str());
  }
  for (const auto& w : warnings) std::printf("warning: %s\n", w.c_str());
  if (!rep.all_pass()) return 1;
  if (strict && !warnings.empty()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nelson stochastic mechanics simulation and verification toolkit"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::string results_dir;
  std::string scenarios_dir = "scenarios";
  std::string plots_csv = "plots.csv";
  unsigned jobs = 0;
  bool strict = false;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;

  auto* run = app.add_subcommand("run", "run a scenario and verify its checks");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory for artifacts");
  run->add_option("--jobs", jobs, "worker threads for path sampling");
  run->add_flag("--strict", strict, "treat warnings as failures");
  auto* seed_opt = run->add_option("--seed", seed_override, "override the scenario seed");

  auto* verify = app.add_subcommand("verify", "re-check a finished run from artifacts");
  verify->add_option("results", results_dir, "run output directory")->required();
  verify->add_flag("--strict", strict, "treat warnings as failures");

  auto* list = app.add_subcommand("list-scenarios", "list bundled scenario files");
  list->add_option("--dir", scenarios_dir, "scenario directory");

  auto* expl = app.add_subcommand("export-plots-data",
                                  "emit tidy long-format CSV for plotting");
  expl->add_option("results", results_dir, "run output directory")->required();
  expl->add_option("--out", plots_csv, "output CSV path");

  CLI11_PARSE(app, argc, argv);
  has_seed_override = seed_opt->count() > 0;

  try {
    if (run->parsed()) {
      nsm::Scenario sc = nsm::Scenario::from_file(scenario_path);
      if (has_seed_override) sc.seed = seed_override;
      if (jobs) sc.jobs = jobs;
      const nsm::RunReport rep = nsm::run_scenario(sc, out_dir);
      std::printf("scenario %s -> %s\n", sc.name.c_str(), out_dir.c_str());
      return print_report(rep, strict, rep.warnings);
    }
    if (verify->parsed()) {
      const nsm::RunReport rep = nsm::verify_run(results_dir);
      return print_report(rep, strict, rep.warnings);
    }
    if (list->parsed()) {
      if (!fs::exists(scenarios_dir)) {
        std::fprintf(stderr, "no such directory: %s\n", scenarios_dir.c_str());
        return 2;
      }
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(scenarios_dir)) {
        if (e.path().extension() == ".json") names.push_back(e.path().string());
      }
      std::sort(names.begin(), names.end());
      for (const auto& n : names) std::printf("%s\n", n.c_str());
      return 0;
    }
    if (expl->parsed()) {
      nsm::export_plots_data(results_dir, plots_csv);
      std::printf("wrote %s\n", plots_csv.c_str());
      return 0;
    }
  } catch (const nsm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const nsm::MissingArtifactError& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 2;
  } catch (const nsm::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
