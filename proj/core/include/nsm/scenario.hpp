#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nsm/grid.hpp"
#include "nsm/measurement.hpp"
#include "nsm/params.hpp"
#include "nsm/potential.hpp"
#include "nsm/sampler.hpp"

namespace nsm {

// One verification check of a scenario run.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string cmp = "max";  // "max": pass iff value <= threshold
  bool pass = false;
  bool recomputable = false;  // can be re-evaluated from stored artifacts
  std::string detail;
};

struct RunReport {
  std::string scenario;
  std::vector<CheckResult> checks;
  std::vector<std::string> warnings;

  bool all_pass() const;
};

// Scenario file contents (JSON, schema documented in the README).
struct Scenario {
  std::string name;
  std::string kind;  // "quantum" or "thermo"

  double x_min = -8.0, x_max = 8.0;
  std::size_t grid_n = 801;

  // quantum
  double hbar = 1.0, mass = 1.0;
  std::string potential_kind = "harmonic";
  double omega = 1.0;
  double well_a = 1.0, well_b = 1.0;
  std::string initial_kind = "harmonic_ground_state";
  double init_x0 = 0.0, init_s0_sq = 0.5, init_k0 = 0.0;

  // thermo
  double kT = 1.0;
  double th_sigma_sq = 2.0;
  std::string hamiltonian_kind = "harmonic";
  double init_mu = 0.0, init_var = 1.0;  // gaussian_density initial

  double t0 = 0.0, t1 = 1.0, dt = 1e-3;
  std::size_t checkpoint_stride = 10;

  std::size_t n_paths = 100000;
  double ensemble_dt = 1e-2;
  std::uint64_t seed = 42;
  bool record_noise = false;
  unsigned jobs = 0;

  // optional measurement event
  bool has_measurement = false;
  double meas_time = 0.0;
  double meas_t2 = 0.0;
  std::vector<std::pair<double, double>> meas_windows;
  double meas_mollify_width = 0.0;

  // verification toggles and thresholds
  std::vector<double> born_check_times;  // empty = defaults
  std::vector<double> duality_check_times;
  double born_tv_max = 0.02;
  double duality_slope_tol = 0.05;
  double norm_drift_max = 1e-6;
  double energy_drift_max = 1e-6;
  std::optional<double> stationary_variance;  // expected value, tol 2%
  double stationary_variance_tol = 0.02;
  std::optional<double> variance_t;  // check Var at this time against
  double variance_expected = 0.0;    // the closed-form value
  double variance_solver_tol = 1e-3;
  double variance_ensemble_tol = 0.03;
  bool check_lagrange = false;
  std::size_t lagrange_n_paths = 20000;
  double lagrange_dt = 2e-3;
  double lagrange_max_sigmas = 3.0;
  std::size_t export_stride = 10;  // ensemble time decimation for export

  static Scenario from_file(const std::filesystem::path& path);
  static Scenario from_json_text(const std::string& text);
  void validate() const;
};

// Execute the scenario pipeline and write artifacts
// (manifest.json, frames/, ensembles/, report.json) under out_dir.
RunReport run_scenario(const Scenario& sc, const std::filesystem::path& out_dir);

// Re-evaluate the recomputable checks of a completed run from its artifacts,
// without re-simulation.
RunReport verify_run(const std::filesystem::path& out_dir);

// Ensemble CSV ("path,t,x") + sidecar manifest entries.
void write_ensemble_csv(const std::filesystem::path& path,
                        const TrajectoryEnsemble& ens,
                        std::size_t time_stride = 1);
TrajectoryEnsemble read_ensemble_csv(const std::filesystem::path& path,
                                     const Grid1D& grid, Direction dir,
                                     std::uint64_t seed, double dt);

// Tidy long-format CSV (series,t,x,value) for external plotting.
void export_plots_data(const std::filesystem::path& run_dir,
                       const std::filesystem::path& out_csv);

void write_report_json(const std::filesystem::path& path, const RunReport& rep);
RunReport read_report_json(const std::filesystem::path& path);

}  // namespace nsm
