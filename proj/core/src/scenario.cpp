#include "nsm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nsm/drift.hpp"
#include "nsm/errors.hpp"
#include "nsm/estimators.hpp"
#include "nsm/io.hpp"
#include "nsm/schrodinger.hpp"
#include "nsm/thermo.hpp"
#include "nsm/variational.hpp"

namespace nsm {

namespace fs = std::filesystem;
using nlohmann::json;

bool RunReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for field '" + key + "'");
  }
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for field '" + key + "'");
  }
}

}  // namespace

Scenario Scenario::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Scenario Scenario::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario sc;
  sc.name = require<std::string>(j, "name");
  sc.kind = require<std::string>(j, "kind");
  if (sc.kind != "quantum" && sc.kind != "thermo") {
    throw ConfigError("field 'kind' must be 'quantum' or 'thermo'");
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    sc.x_min = get_or(g, "x_min", sc.x_min);
    sc.x_max = get_or(g, "x_max", sc.x_max);
    sc.grid_n = get_or(g, "n", sc.grid_n);
  }
  if (j.contains("params")) {
    const json& p = j["params"];
    sc.hbar = get_or(p, "hbar", sc.hbar);
    sc.mass = get_or(p, "mass", sc.mass);
  }
  if (j.contains("potential")) {
    const json& p = j["potential"];
    sc.potential_kind = get_or<std::string>(p, "kind", sc.potential_kind);
    sc.omega = get_or(p, "omega", sc.omega);
    sc.well_a = get_or(p, "a", sc.well_a);
    sc.well_b = get_or(p, "b", sc.well_b);
  }
  if (j.contains("thermo")) {
    const json& t = j["thermo"];
    sc.kT = get_or(t, "kT", sc.kT);
    sc.th_sigma_sq = get_or(t, "sigma_sq", sc.th_sigma_sq);
    if (t.contains("hamiltonian")) {
      sc.hamiltonian_kind =
          get_or<std::string>(t["hamiltonian"], "kind", sc.hamiltonian_kind);
      sc.omega = get_or(t["hamiltonian"], "omega", sc.omega);
    }
  }
  if (j.contains("initial")) {
    const json& i = j["initial"];
    sc.initial_kind = get_or<std::string>(i, "kind", sc.initial_kind);
    sc.init_x0 = get_or(i, "x0", sc.init_x0);
    sc.init_s0_sq = get_or(i, "s0_sq", sc.init_s0_sq);
    sc.init_k0 = get_or(i, "k0", sc.init_k0);
    sc.init_mu = get_or(i, "mu", sc.init_mu);
    sc.init_var = get_or(i, "var", sc.init_var);
  }
  if (j.contains("time")) {
    const json& t = j["time"];
    sc.t0 = get_or(t, "t0", sc.t0);
    sc.t1 = require<double>(t, "t1");
    sc.dt = get_or(t, "dt", sc.dt);
    sc.checkpoint_stride = get_or(t, "checkpoint_stride", sc.checkpoint_stride);
  }
  if (j.contains("ensemble")) {
    const json& e = j["ensemble"];
    sc.n_paths = get_or(e, "n_paths", sc.n_paths);
    sc.ensemble_dt = get_or(e, "dt", sc.ensemble_dt);
    sc.seed = get_or(e, "seed", sc.seed);
    sc.record_noise = get_or(e, "record_noise", sc.record_noise);
    sc.export_stride = get_or(e, "export_stride", sc.export_stride);
  }
  if (j.contains("measurement")) {
    const json& m = j["measurement"];
    sc.has_measurement = true;
    sc.meas_time = require<double>(m, "time");
    sc.meas_t2 = get_or(m, "t2", sc.t1);
    sc.meas_mollify_width = get_or(m, "mollify_width", 0.0);
    if (m.contains("window")) {
      for (const auto& iv : m["window"]) {
        if (!iv.is_array() || iv.size() != 2) {
          throw ConfigError("field 'window' must be a list of [a, b] pairs");
        }
        sc.meas_windows.emplace_back(iv[0].get<double>(), iv[1].get<double>());
      }
    } else {
      throw ConfigError("measurement requires field 'window'");
    }
  }
  if (j.contains("checks")) {
    const json& c = j["checks"];
    if (c.contains("born_times")) {
      sc.born_check_times = c["born_times"].get<std::vector<double>>();
    }
    if (c.contains("duality_times")) {
      sc.duality_check_times = c["duality_times"].get<std::vector<double>>();
    }
    sc.born_tv_max = get_or(c, "born_tv_max", sc.born_tv_max);
    sc.duality_slope_tol = get_or(c, "duality_slope_tol", sc.duality_slope_tol);
    sc.norm_drift_max = get_or(c, "norm_drift_max", sc.norm_drift_max);
    sc.energy_drift_max = get_or(c, "energy_drift_max", sc.energy_drift_max);
    if (c.contains("stationary_variance")) {
      sc.stationary_variance = c["stationary_variance"].get<double>();
      sc.stationary_variance_tol =
          get_or(c, "stationary_variance_tol", sc.stationary_variance_tol);
    }
    if (c.contains("variance_t")) {
      sc.variance_t = c["variance_t"].get<double>();
      sc.variance_expected = require<double>(c, "variance_expected");
      sc.variance_solver_tol = get_or(c, "variance_solver_tol", sc.variance_solver_tol);
      sc.variance_ensemble_tol =
          get_or(c, "variance_ensemble_tol", sc.variance_ensemble_tol);
    }
    sc.check_lagrange = get_or(c, "lagrange", sc.check_lagrange);
    sc.lagrange_n_paths = get_or(c, "lagrange_n_paths", sc.lagrange_n_paths);
    sc.lagrange_dt = get_or(c, "lagrange_dt", sc.lagrange_dt);
    sc.lagrange_max_sigmas = get_or(c, "lagrange_max_sigmas", sc.lagrange_max_sigmas);
  }
  sc.validate();
  return sc;
}

void Scenario::validate() const {
  if (!(hbar > 0.0)) throw ConfigError("field 'hbar' must be > 0");
  if (!(mass > 0.0)) throw ConfigError("field 'mass' must be > 0");
  if (!(x_min < x_max)) throw ConfigError("field 'x_min' must be < x_max");
  if (grid_n < 8) throw ConfigError("field 'n' must be >= 8");
  if (!(t1 > t0)) throw ConfigError("field 't1' must be > t0");
  if (!(dt > 0.0)) throw ConfigError("field 'dt' must be > 0");
  if (!(ensemble_dt > 0.0)) throw ConfigError("field 'ensemble.dt' must be > 0");
  if (n_paths < 1) throw ConfigError("field 'n_paths' must be >= 1");
  if (kind == "thermo" && !(kT > 0.0)) throw ConfigError("field 'kT' must be > 0");
  if (kind == "thermo" && !(th_sigma_sq > 0.0)) {
    throw ConfigError("field 'sigma_sq' must be > 0");
  }
  if (has_measurement) {
    if (meas_time < t0 || meas_time > t1) {
      throw ConfigError("field 'measurement.time' must lie in [t0, t1]");
    }
    if (meas_t2 < meas_time || meas_t2 > t1) {
      throw ConfigError("field 'measurement.t2' must lie in [time, t1]");
    }
    for (const auto& [a, b] : meas_windows) {
      if (!(a < b)) throw ConfigError("field 'window' intervals need a < b");
    }
  }
}

namespace {

json scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["kind"] = sc.kind;
  j["grid"] = {{"x_min", sc.x_min}, {"x_max", sc.x_max}, {"n", sc.grid_n}};
  j["params"] = {{"hbar", sc.hbar}, {"mass", sc.mass}};
  j["potential"] = {{"kind", sc.potential_kind}, {"omega", sc.omega},
                    {"a", sc.well_a},            {"b", sc.well_b}};
  j["thermo"] = {{"kT", sc.kT},
                 {"sigma_sq", sc.th_sigma_sq},
                 {"hamiltonian", {{"kind", sc.hamiltonian_kind}, {"omega", sc.omega}}}};
  j["initial"] = {{"kind", sc.initial_kind}, {"x0", sc.init_x0},
                  {"s0_sq", sc.init_s0_sq},  {"k0", sc.init_k0},
                  {"mu", sc.init_mu},        {"var", sc.init_var}};
  j["time"] = {{"t0", sc.t0},
               {"t1", sc.t1},
               {"dt", sc.dt},
               {"checkpoint_stride", sc.checkpoint_stride}};
  j["ensemble"] = {{"n_paths", sc.n_paths},
                   {"dt", sc.ensemble_dt},
                   {"seed", sc.seed},
                   {"record_noise", sc.record_noise},
                   {"export_stride", sc.export_stride}};
  if (sc.has_measurement) {
    json w = json::array();
    for (const auto& [a, b] : sc.meas_windows) w.push_back({a, b});
    j["measurement"] = {{"time", sc.meas_time},
                        {"t2", sc.meas_t2},
                        {"window", w},
                        {"mollify_width", sc.meas_mollify_width}};
  }
  json c;
  if (!sc.born_check_times.empty()) c["born_times"] = sc.born_check_times;
  if (!sc.duality_check_times.empty()) c["duality_times"] = sc.duality_check_times;
  c["born_tv_max"] = sc.born_tv_max;
  c["duality_slope_tol"] = sc.duality_slope_tol;
  c["norm_drift_max"] = sc.norm_drift_max;
  c["energy_drift_max"] = sc.energy_drift_max;
  if (sc.stationary_variance) {
    c["stationary_variance"] = *sc.stationary_variance;
    c["stationary_variance_tol"] = sc.stationary_variance_tol;
  }
  if (sc.variance_t) {
    c["variance_t"] = *sc.variance_t;
    c["variance_expected"] = sc.variance_expected;
    c["variance_solver_tol"] = sc.variance_solver_tol;
    c["variance_ensemble_tol"] = sc.variance_ensemble_tol;
  }
  c["lagrange"] = sc.check_lagrange;
  c["lagrange_n_paths"] = sc.lagrange_n_paths;
  c["lagrange_dt"] = sc.lagrange_dt;
  c["lagrange_max_sigmas"] = sc.lagrange_max_sigmas;
  j["checks"] = c;
  return j;
}

ScalarPotential make_potential(const Scenario& sc, const Grid1D& g) {
  const std::string& kind =
      sc.kind == "thermo" ? sc.hamiltonian_kind : sc.potential_kind;
  if (kind == "free") return ScalarPotential::free_particle(g);
  if (kind == "harmonic") return ScalarPotential::harmonic(g, sc.omega, sc.mass);
  if (kind == "double_well") {
    return ScalarPotential::double_well(g, sc.well_a, sc.well_b);
  }
  throw ConfigError("unknown potential kind '" + kind + "'");
}

Wavefunction make_initial_wf(const Scenario& sc, const Grid1D& g) {
  if (sc.initial_kind == "harmonic_ground_state") {
    return harmonic_ground_state(g, sc.hbar, sc.mass, sc.omega, sc.t0);
  }
  if (sc.initial_kind == "gaussian") {
    return gaussian_packet(g, sc.init_x0, sc.init_s0_sq, sc.init_k0, sc.t0);
  }
  throw ConfigError("unknown initial kind '" + sc.initial_kind + "'");
}

CheckResult make_check(const std::string& name, double value, double threshold,
                       bool recomputable, const std::string& detail = "") {
  CheckResult c;
  c.name = name;
  c.value = value;
  c.threshold = threshold;
  c.pass = value <= threshold;
  c.recomputable = recomputable;
  c.detail = detail;
  return c;
}

std::vector<double> default_check_times(const Scenario& sc) {
  const double span = sc.t1 - sc.t0;
  return {sc.t0 + 0.25 * span, sc.t0 + 0.5 * span, sc.t0 + 0.75 * span, sc.t1};
}

// Ensemble variance of the position slice at time t.
double slice_variance(const TrajectoryEnsemble& ens, double t) {
  const std::size_t k = ens.time_index(t);
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    const double x = ens.position(p, k);
    s += x;
    s2 += x * x;
  }
  const auto n = static_cast<double>(ens.n_paths());
  const double m = s / n;
  return s2 / n - m * m;
}

struct QuantumArtifacts {
  WavefunctionHistory history;
  TrajectoryEnsemble ensemble;
  std::optional<WavefunctionHistory> tilde_history;
  std::optional<TrajectoryEnsemble> tilde_ensemble;
  std::optional<Density> rho_tilde_t1;
};

// The statistical checks shared verbatim by run and verify. Every check here
// only touches frame/ensemble data that is exported to the artifacts.
void quantum_recomputable_checks(const Scenario& sc, const QuantumArtifacts& art,
                                 RunReport& rep) {
  const PhysicalParams params(sc.hbar, sc.mass);
  const WavefunctionHistory& hist = art.history;

  // norm drift across stored frames
  double max_norm_dev = 0.0;
  for (std::size_t k = 0; k < hist.size(); ++k) {
    max_norm_dev = std::max(max_norm_dev, std::abs(hist.frame(k).norm() - 1.0));
  }
  rep.checks.push_back(
      make_check("norm_drift", max_norm_dev, sc.norm_drift_max, true));

  // energy drift (relative), time-independent V
  {
    const ScalarPotential V = make_potential(sc, hist.grid());
    double e0 = 0.0, dev = 0.0;
    for (std::size_t k = 0; k < hist.size(); ++k) {
      const double e = energy_expectation(hist.frame(k), V, params);
      if (k == 0) {
        e0 = e;
      } else {
        dev = std::max(dev, std::abs(e - e0) / std::max(std::abs(e0), 1e-300));
      }
    }
    rep.checks.push_back(make_check("energy_drift", dev, sc.energy_drift_max, true));
  }

  // Born rule at the checkpoint times
  const std::vector<double> born_times =
      sc.born_check_times.empty() ? default_check_times(sc) : sc.born_check_times;
  double worst_tv = 0.0;
  for (double t : born_times) {
    const Density emp = empirical_density(art.ensemble, t, 64);
    const Density truth = born_density(normalize(hist.frame(hist.nearest_frame(t))));
    worst_tv = std::max(worst_tv, tv_distance(emp, truth));
  }
  rep.checks.push_back(make_check("born_tv", worst_tv, sc.born_tv_max, true));

  // duality slope, pooled over the requested times
  const std::vector<double> dual_times =
      sc.duality_check_times.empty()
          ? std::vector<double>{sc.t0 + 0.5 * (sc.t1 - sc.t0)}
          : sc.duality_check_times;
  double slope_acc = 0.0;
  for (double t : dual_times) {
    const DualityReport d = duality_residual(art.ensemble, t, params);
    slope_acc += d.slope;
  }
  const double slope = slope_acc / static_cast<double>(dual_times.size());
  rep.checks.push_back(make_check("duality_slope_dev", std::abs(slope - 1.0),
                                  sc.duality_slope_tol, true,
                                  "slope=" + format_double(slope)));

  if (sc.stationary_variance) {
    double acc = 0.0;
    for (double t : born_times) acc += slice_variance(art.ensemble, t);
    const double var = acc / static_cast<double>(born_times.size());
    rep.checks.push_back(make_check(
        "stationary_variance_dev",
        std::abs(var - *sc.stationary_variance) / *sc.stationary_variance,
        sc.stationary_variance_tol, true, "variance=" + format_double(var)));
  }

  if (sc.variance_t) {
    const Density rho =
        born_density(normalize(hist.frame(hist.nearest_frame(*sc.variance_t))));
    const double solver_var = rho.variance();
    rep.checks.push_back(make_check(
        "solver_variance_dev",
        std::abs(solver_var - sc.variance_expected) / sc.variance_expected,
        sc.variance_solver_tol, true, "variance=" + format_double(solver_var)));
    const double ens_var = slice_variance(art.ensemble, *sc.variance_t);
    rep.checks.push_back(make_check(
        "ensemble_variance_dev",
        std::abs(ens_var - sc.variance_expected) / sc.variance_expected,
        sc.variance_ensemble_tol, true, "variance=" + format_double(ens_var)));
  }

  // continuity equation on the stored frames
  rep.checks.push_back(make_check("continuity_residual",
                                  continuity_residual(hist, params), 1e-3, true));

  // collapse checks
  if (art.tilde_history) {
    const WavefunctionHistory& tilde = *art.tilde_history;
    // phase invariance at t1 on the joint support
    {
      const auto& a = tilde.frame_values(0);
      const std::size_t k1 = hist.nearest_frame(sc.meas_time);
      const auto& b = hist.frame_values(k1);
      double amax = 0.0, bmax = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        amax = std::max(amax, std::abs(a[i]));
        bmax = std::max(bmax, std::abs(b[i]));
      }
      double dev = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i]) > 1e-12 * amax && std::abs(b[i]) > 1e-12 * bmax) {
          double d = std::arg(a[i]) - std::arg(b[i]);
          d = std::remainder(d, 2.0 * M_PI);
          dev = std::max(dev, std::abs(d));
        }
      }
      rep.checks.push_back(make_check("collapse_phase_dev", dev, 1e-12, true));
    }
    // repetition probability over D at t1
    if (!sc.meas_windows.empty()) {
      const Grid1D& g = tilde.grid();
      std::vector<double> masked(g.size(), 0.0);
      const auto& u = tilde.frame_values(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.node(i);
        for (const auto& [a, b] : sc.meas_windows) {
          if (x >= a && x <= b) {
            masked[i] = std::norm(u[i]);
            break;
          }
        }
      }
      const double rep_prob = trapezoid(g, masked);
      rep.checks.push_back(
          make_check("repetition_dev", std::abs(rep_prob - 1.0), 1e-10, true,
                     "value=" + format_double(rep_prob)));
    }
    // norm of every post-measurement frame
    double dev = 0.0;
    for (std::size_t k = 0; k < tilde.size(); ++k) {
      dev = std::max(dev, std::abs(tilde.frame(k).norm() - 1.0));
    }
    rep.checks.push_back(make_check("collapse_norm_dev", dev, 1e-6, true));

    // Born rule of the post-measurement ensemble against |psi~|^2
    if (art.tilde_ensemble) {
      const double tm = 0.5 * (sc.meas_time + sc.meas_t2);
      const std::size_t k = tilde.nearest_frame(tm);
      const Density emp =
          empirical_density(*art.tilde_ensemble, tilde.times()[k], 64);
      const Density truth = born_density(normalize(tilde.frame(k)));
      rep.checks.push_back(make_check("collapse_born_tv", tv_distance(emp, truth),
                                      sc.born_tv_max, true));
    }
  }
}

struct ThermoArtifacts {
  DensityHistory history;
  std::optional<DensityHistory> tilde_history;
  std::optional<TrajectoryEnsemble> tilde_ensemble;
  std::optional<Density> rho_tilde_t1;
};

void thermo_recomputable_checks(const Scenario& sc, const ThermoArtifacts& art,
                                RunReport& rep) {
  const Grid1D& g = art.history.grid();
  const ScalarPotential H = make_potential(sc, g);
  const ThermoParams tp(sc.kT, sc.th_sigma_sq, H);
  const DriftField b_plus = forward_drift_from_H(tp);
  const Density equil = equilibrium_density(tp);

  // mass conservation on stored frames
  double mass_dev = 0.0;
  for (std::size_t k = 0; k < art.history.size(); ++k) {
    mass_dev = std::max(mass_dev, std::abs(art.history.frame(k).total_mass() - 1.0));
  }
  rep.checks.push_back(make_check("fp_mass_dev", mass_dev, 1e-8, true));

  // KL to equilibrium non-increasing across checkpoints
  double worst_increase = 0.0;
  double prev = relative_entropy(art.history.frame(0), equil);
  for (std::size_t k = 1; k < art.history.size(); ++k) {
    const double cur = relative_entropy(art.history.frame(k), equil);
    worst_increase = std::max(worst_increase, cur - prev);
    prev = cur;
  }
  rep.checks.push_back(
      make_check("fp_kl_monotonicity", worst_increase, 1e-10, true));

  if (art.tilde_history) {
    double tmass_dev = 0.0;
    for (std::size_t k = 0; k < art.tilde_history->size(); ++k) {
      tmass_dev = std::max(
          tmass_dev, std::abs(art.tilde_history->frame(k).total_mass() - 1.0));
    }
    rep.checks.push_back(make_check("posterior_mass_dev", tmass_dev, 1e-8, true));

    // posterior relaxes toward equilibrium
    double worst = 0.0;
    double prev_kl = relative_entropy(art.tilde_history->frame(0), equil);
    for (std::size_t k = 1; k < art.tilde_history->size(); ++k) {
      const double cur = relative_entropy(art.tilde_history->frame(k), equil);
      worst = std::max(worst, cur - prev_kl);
      prev_kl = cur;
    }
    rep.checks.push_back(make_check("posterior_kl_monotonicity", worst, 1e-10, true));

    // Theorem-2 drift structure on the post-measurement ensemble
    if (art.tilde_ensemble) {
      const PhysicalParams diffusion(sc.th_sigma_sq, 1.0);
      const double tm = 0.5 * (sc.meas_time + sc.meas_t2);
      const std::size_t km = art.tilde_history->nearest_frame(tm);
      const double t_est = art.tilde_history->times()[km];

      const BinnedField fwd = estimate_forward_drift(*art.tilde_ensemble, t_est, 64);
      const BinnedField bwd = estimate_backward_drift(*art.tilde_ensemble, t_est, 64);
      const Density rho_t = art.tilde_history->frame(km);
      const DriftField tilde_b =
          backward_drift_field(rho_t, b_plus, sc.th_sigma_sq);

      const double peak =
          *std::max_element(rho_t.values().begin(), rho_t.values().end());
      std::vector<double> xs_f, ys_f, ws_f, xs_b, ys_b, ws_b;
      for (std::size_t b = 0; b < fwd.centers.size(); ++b) {
        if (!fwd.occupied(b) || !bwd.occupied(b) || fwd.counts[b] < 50) continue;
        const double x = fwd.centers[b];
        if (interp_linear(g, rho_t.values(), x) < 0.05 * peak) continue;
        xs_f.push_back(interp_linear(g, b_plus.b_plus(), x));
        ys_f.push_back(fwd.values[b]);
        ws_f.push_back(static_cast<double>(fwd.counts[b]));
        xs_b.push_back(interp_linear(g, tilde_b.b_minus(), x));
        ys_b.push_back(bwd.values[b]);
        ws_b.push_back(static_cast<double>(bwd.counts[b]));
      }
      if (xs_f.size() >= 3) {
        const auto [slope_f, icf] = weighted_regression(xs_f, ys_f, ws_f);
        const auto [slope_b, icb] = weighted_regression(xs_b, ys_b, ws_b);
        rep.checks.push_back(make_check(
            "theorem2_forward_slope_dev", std::abs(slope_f - 1.0),
            sc.duality_slope_tol, true, "slope=" + format_double(slope_f)));
        rep.checks.push_back(make_check(
            "theorem2_backward_slope_dev", std::abs(slope_b - 1.0),
            sc.duality_slope_tol, true, "slope=" + format_double(slope_b)));
      } else {
        rep.warnings.push_back("theorem2 check skipped: too few occupied bins");
      }
    }
  }
}

std::vector<std::size_t> export_time_indices(const Scenario& sc,
                                             const TrajectoryEnsemble& ens) {
  std::set<std::size_t> keep;
  const std::vector<double> born_times =
      sc.born_check_times.empty() ? default_check_times(sc) : sc.born_check_times;
  auto add_time = [&](double t) {
    try {
      keep.insert(ens.time_index(t, 0.5 * ens.dt() + 1e-9));
    } catch (const InsufficientDataError&) {
    }
  };
  for (double t : born_times) add_time(t);
  const std::vector<double> dual_times =
      sc.duality_check_times.empty()
          ? std::vector<double>{sc.t0 + 0.5 * (sc.t1 - sc.t0)}
          : sc.duality_check_times;
  for (double t : dual_times) {
    try {
      const std::size_t k = ens.time_index(t, 0.5 * ens.dt() + 1e-9);
      keep.insert(k);
      if (k > 0) keep.insert(k - 1);
      if (k + 1 < ens.n_steps()) keep.insert(k + 1);
    } catch (const InsufficientDataError&) {
    }
  }
  if (sc.variance_t) add_time(*sc.variance_t);
  for (std::size_t k = 0; k < ens.n_steps(); k += std::max<std::size_t>(1, sc.export_stride)) {
    keep.insert(k);
  }
  keep.insert(0);
  keep.insert(ens.n_steps() - 1);
  return {keep.begin(), keep.end()};
}

}  // namespace

void write_ensemble_csv(const fs::path& path, const TrajectoryEnsemble& ens,
                        std::size_t time_stride) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << "path,t,x\n";
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    for (std::size_t k = 0; k < ens.n_steps(); k += time_stride) {
      out << p << ',' << format_double(ens.times()[k]) << ','
          << format_double(ens.position(p, k)) << '\n';
    }
  }
}

TrajectoryEnsemble read_ensemble_csv(const fs::path& path, const Grid1D& grid,
                                     Direction dir, std::uint64_t seed, double dt) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing ensemble file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "path,t,x") {
    throw Error("unexpected ensemble header in " + path.string());
  }
  std::vector<double> times;
  std::vector<double> pos;
  std::size_t n_paths = 0, per_path = 0, row_in_path = 0;
  long long prev_path = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const long long p = std::stoll(cell);
    std::getline(ss, cell, ',');
    const double t = std::stod(cell);
    std::getline(ss, cell, ',');
    const double x = std::stod(cell);
    if (p != prev_path) {
      if (prev_path >= 0 && per_path == 0) per_path = row_in_path;
      if (per_path > 0 && row_in_path != per_path) {
        throw Error("ragged ensemble csv " + path.string());
      }
      prev_path = p;
      ++n_paths;
      row_in_path = 0;
    }
    if (n_paths == 1) times.push_back(t);
    pos.push_back(x);
    ++row_in_path;
  }
  if (n_paths == 0) throw EmptyEnsembleError("empty ensemble csv " + path.string());
  return TrajectoryEnsemble(grid, dir, std::move(times), n_paths, std::move(pos),
                            {}, seed, dt, 0);
}

void write_report_json(const fs::path& path, const RunReport& rep) {
  json j;
  j["scenario"] = rep.scenario;
  j["all_pass"] = rep.all_pass();
  j["checks"] = json::array();
  for (const auto& c : rep.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"value", c.value},
                           {"threshold", c.threshold},
                           {"cmp", c.cmp},
                           {"pass", c.pass},
                           {"recomputable", c.recomputable},
                           {"detail", c.detail}});
  }
  j["warnings"] = rep.warnings;
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

RunReport read_report_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("missing report " + path.string());
  json j;
  in >> j;
  RunReport rep;
  rep.scenario = j.at("scenario").get<std::string>();
  for (const auto& c : j.at("checks")) {
    CheckResult cr;
    cr.name = c.at("name").get<std::string>();
    cr.value = c.at("value").get<double>();
    cr.threshold = c.at("threshold").get<double>();
    cr.cmp = c.at("cmp").get<std::string>();
    cr.pass = c.at("pass").get<bool>();
    cr.recomputable = c.at("recomputable").get<bool>();
    cr.detail = c.at("detail").get<std::string>();
    rep.checks.push_back(cr);
  }
  if (j.contains("warnings")) {
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
  }
  return rep;
}

namespace {

RunReport run_quantum(const Scenario& sc, const fs::path& out) {
  const Grid1D g(sc.x_min, sc.x_max, sc.grid_n);
  const PhysicalParams params(sc.hbar, sc.mass);
  const ScalarPotential V = make_potential(sc, g);
  const Wavefunction psi0 = make_initial_wf(sc, g);

  SolverConfig solver_cfg;
  solver_cfg.dt_max = std::max(1e-2, sc.dt);
  const WavefunctionHistory hist =
      propagate(psi0, V, params, sc.t0, sc.t1, sc.dt, sc.checkpoint_stride, solver_cfg);
  const DriftHistory drifts = DriftHistory::from_history(hist, params);

  SamplerConfig scfg;
  scfg.n_paths = sc.n_paths;
  scfg.dt = sc.ensemble_dt;
  scfg.seed = sc.seed;
  scfg.record_noise = sc.record_noise;
  scfg.jobs = sc.jobs;
  const TrajectoryEnsemble ens =
      sample_forward(born_density(psi0), drifts, params, sc.t0, sc.t1, scfg);

  QuantumArtifacts art{hist, ens, std::nullopt, std::nullopt, std::nullopt};

  if (sc.has_measurement) {
    MeasurementEvent ev =
        MeasurementEvent::window(sc.meas_time, sc.meas_windows, sc.meas_mollify_width);
    CollapseOptions copt;
    const CollapseResult collapse =
        post_measurement_process(hist, ev, V, params, sc.dt, sc.meas_t2, copt);
    const DriftHistory tilde_drifts =
        DriftHistory::from_history(collapse.psi_tilde_history, params);
    SamplerConfig tcfg = scfg;
    tcfg.seed = scfg.seed + 1;
    const TrajectoryEnsemble tilde_ens =
        sample_forward(collapse.rho_tilde_t1, tilde_drifts, params, sc.meas_time,
                       sc.meas_t2, tcfg);
    art.tilde_history = collapse.psi_tilde_history;
    art.tilde_ensemble = tilde_ens;
    art.rho_tilde_t1 = collapse.rho_tilde_t1;
  }

  RunReport rep;
  rep.scenario = sc.name;
  quantum_recomputable_checks(sc, art, rep);

  // residual of the Hamilton-Jacobi transform on the stored frames; the
  // threshold scales with the checkpoint spacing
  {
    const double frame_dt = sc.dt * static_cast<double>(sc.checkpoint_stride);
    const double thresh = std::max(1e-6, 10.0 * frame_dt * frame_dt);
    rep.checks.push_back(
        make_check("hj_residual", hj_residual(hist, V, params), thresh, false));
  }

  if (sc.check_lagrange) {
    SamplerConfig lcfg;
    lcfg.n_paths = sc.lagrange_n_paths;
    lcfg.dt = sc.lagrange_dt;
    lcfg.seed = sc.seed + 2;
    lcfg.jobs = sc.jobs;
    const TrajectoryEnsemble lens =
        sample_forward(born_density(psi0), drifts, params, sc.t0, sc.t1, lcfg);
    double worst = 0.0;
    std::string detail;
    for (const TestFunction& tf : TestFunction::bank()) {
      const LagrangeValue lv = lagrange_functional_value(lens, drifts, tf, params);
      worst = std::max(worst, lv.sigmas());
      detail += tf.name + "=" + format_double(lv.sigmas()) + "sigma ";
    }
    rep.checks.push_back(make_check("lagrange_max_sigmas", worst,
                                    sc.lagrange_max_sigmas, false, detail));
  }

  // artifacts
  fs::create_directories(out);
  write_history(out / "frames", hist, params);
  fs::create_directories(out / "ensembles");
  {
    const TrajectoryEnsemble sparse = ens.at_times(export_time_indices(sc, ens));
    write_ensemble_csv(out / "ensembles" / "forward.csv", sparse);
  }
  if (art.tilde_history) {
    write_history(out / "frames_tilde", *art.tilde_history, params);
    const TrajectoryEnsemble& te = *art.tilde_ensemble;
    std::set<std::size_t> keep;
    const double tm = 0.5 * (sc.meas_time + sc.meas_t2);
    keep.insert(te.time_index(tm, 0.5 * te.dt() + 1e-9));
    keep.insert(0);
    keep.insert(te.n_steps() - 1);
    write_ensemble_csv(out / "ensembles" / "post_measurement.csv",
                       te.at_times({keep.begin(), keep.end()}));
  }
  return rep;
}

RunReport run_thermo(const Scenario& sc, const fs::path& out) {
  const Grid1D g(sc.x_min, sc.x_max, sc.grid_n);
  const ScalarPotential H = make_potential(sc, g);
  const ThermoParams tp(sc.kT, sc.th_sigma_sq, H);
  const DriftField b_plus = forward_drift_from_H(tp);

  Density rho0 = sc.initial_kind == "gaussian_density"
                     ? gaussian_density(g, sc.init_mu, sc.init_var, sc.t0)
                     : equilibrium_density(tp).with_time(sc.t0);

  FokkerPlanckConfig fcfg;
  fcfg.checkpoint_stride = sc.checkpoint_stride;
  const DensityHistory hist =
      fokker_planck_propagate(rho0, b_plus, sc.th_sigma_sq, sc.t0, sc.t1, sc.dt, fcfg);

  ThermoArtifacts art{hist, std::nullopt, std::nullopt, std::nullopt};

  if (sc.has_measurement) {
    MeasurementEvent ev =
        MeasurementEvent::window(sc.meas_time, sc.meas_windows, sc.meas_mollify_width);
    const ClassicalMeasurementResult cm = classical_measurement(
        hist, b_plus, ev, sc.th_sigma_sq, sc.meas_t2, sc.dt, fcfg);
    art.tilde_history = cm.rho_tilde_history;
    art.rho_tilde_t1 = cm.rho_tilde_t1;

    const PhysicalParams diffusion(sc.th_sigma_sq, 1.0);
    SamplerConfig scfg;
    scfg.n_paths = sc.n_paths;
    scfg.dt = sc.ensemble_dt;
    scfg.seed = sc.seed;
    scfg.jobs = sc.jobs;
    const DriftHistory bdrift({b_plus});
    art.tilde_ensemble = sample_forward(cm.rho_tilde_t1, bdrift, diffusion,
                                        sc.meas_time, sc.meas_t2, scfg);
  }

  RunReport rep;
  rep.scenario = sc.name;
  thermo_recomputable_checks(sc, art, rep);

  // artifacts: densities as csv frames
  fs::create_directories(out / "frames");
  const PhysicalParams dummy(1.0, 1.0);
  json manifest;
  manifest["times"] = json::array();
  manifest["files"] = json::array();
  for (std::size_t k = 0; k < hist.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "rho_%05zu.csv", k);
    write_density_csv(out / "frames" / name, hist.frame(k), dummy);
    manifest["times"].push_back(hist.times()[k]);
    manifest["files"].push_back(name);
  }
  std::ofstream mf(out / "frames" / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (art.tilde_history) {
    fs::create_directories(out / "frames_tilde");
    json tmanifest;
    tmanifest["times"] = json::array();
    tmanifest["files"] = json::array();
    for (std::size_t k = 0; k < art.tilde_history->size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "rho_%05zu.csv", k);
      write_density_csv(out / "frames_tilde" / name, art.tilde_history->frame(k),
                        dummy);
      tmanifest["times"].push_back(art.tilde_history->times()[k]);
      tmanifest["files"].push_back(name);
    }
    std::ofstream tmf(out / "frames_tilde" / "manifest.json");
    tmf << tmanifest.dump(2) << "\n";
  }
  if (art.tilde_ensemble) {
    fs::create_directories(out / "ensembles");
    const TrajectoryEnsemble& te = *art.tilde_ensemble;
    std::set<std::size_t> keep;
    const double tm = 0.5 * (sc.meas_time + sc.meas_t2);
    const std::size_t km = te.time_index(tm, 0.5 * te.dt() + 1e-9);
    keep.insert(km);
    if (km > 0) keep.insert(km - 1);
    if (km + 1 < te.n_steps()) keep.insert(km + 1);
    keep.insert(0);
    keep.insert(te.n_steps() - 1);
    write_ensemble_csv(out / "ensembles" / "post_measurement.csv",
                       te.at_times({keep.begin(), keep.end()}));
  }
  return rep;
}

DensityHistory read_density_history(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw MissingArtifactError("missing manifest in " + dir.string());
  json manifest;
  in >> manifest;
  std::vector<double> times;
  std::vector<std::vector<double>> frames;
  std::optional<Grid1D> g;
  for (std::size_t k = 0; k < manifest.at("files").size(); ++k) {
    const Density rho =
        read_density_csv(dir / manifest.at("files")[k].get<std::string>());
    if (!g) g = rho.grid();
    times.push_back(manifest.at("times")[k].get<double>());
    frames.push_back(rho.values());
  }
  if (!g) throw MissingArtifactError("no frames in " + dir.string());
  return DensityHistory(*g, std::move(times), std::move(frames));
}

}  // namespace

RunReport run_scenario(const Scenario& sc, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  RunReport rep = sc.kind == "quantum" ? run_quantum(sc, out_dir)
                                       : run_thermo(sc, out_dir);
  json manifest;
  manifest["scenario"] = scenario_to_json(sc);
  manifest["kind"] = sc.kind;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw Error("cannot open manifest in " + out_dir.string());
  out << manifest.dump(2) << "\n";
  write_report_json(out_dir / "report.json", rep);
  return rep;
}

RunReport verify_run(const fs::path& out_dir) {
  std::ifstream in(out_dir / "manifest.json");
  if (!in) throw MissingArtifactError("missing manifest.json in " + out_dir.string());
  json manifest;
  in >> manifest;
  const Scenario sc = Scenario::from_json_text(manifest.at("scenario").dump());
  const RunReport stored = read_report_json(out_dir / "report.json");

  RunReport rep;
  rep.scenario = sc.name;
  if (sc.kind == "quantum") {
    QuantumArtifacts art{
        read_history(out_dir / "frames"),
        read_ensemble_csv(out_dir / "ensembles" / "forward.csv",
                          Grid1D(sc.x_min, sc.x_max, sc.grid_n),
                          Direction::forward, sc.seed, sc.ensemble_dt),
        std::nullopt, std::nullopt, std::nullopt};
    if (sc.has_measurement) {
      art.tilde_history = read_history(out_dir / "frames_tilde");
      art.tilde_ensemble = read_ensemble_csv(
          out_dir / "ensembles" / "post_measurement.csv",
          Grid1D(sc.x_min, sc.x_max, sc.grid_n), Direction::forward, sc.seed + 1,
          sc.ensemble_dt);
    }
    quantum_recomputable_checks(sc, art, rep);
  } else {
    ThermoArtifacts art{read_density_history(out_dir / "frames"), std::nullopt,
                        std::nullopt, std::nullopt};
    if (sc.has_measurement) {
      art.tilde_history = read_density_history(out_dir / "frames_tilde");
      art.tilde_ensemble = read_ensemble_csv(
          out_dir / "ensembles" / "post_measurement.csv",
          Grid1D(sc.x_min, sc.x_max, sc.grid_n), Direction::forward, sc.seed,
          sc.ensemble_dt);
    }
    thermo_recomputable_checks(sc, art, rep);
  }

  // carry over checks that need live simulation state
  for (const auto& c : stored.checks) {
    if (!c.recomputable) rep.checks.push_back(c);
  }
  return rep;
}

void export_plots_data(const fs::path& run_dir, const fs::path& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw Error("cannot open " + out_csv.string());
  out << "series,t,x,value\n";

  auto dump_frames = [&](const fs::path& dir, const std::string& series,
                         bool is_density) {
    if (!fs::exists(dir / "manifest.json")) return;
    std::ifstream in(dir / "manifest.json");
    json manifest;
    in >> manifest;
    for (std::size_t k = 0; k < manifest.at("files").size(); ++k) {
      const fs::path p = dir / manifest.at("files")[k].get<std::string>();
      const double t = manifest.at("times")[k].get<double>();
      if (is_density) {
        const Density rho = read_density_csv(p);
        for (std::size_t i = 0; i < rho.grid().size(); ++i) {
          out << series << ',' << format_double(t) << ','
              << format_double(rho.grid().node(i)) << ','
              << format_double(rho.values()[i]) << '\n';
        }
      } else {
        const Wavefunction psi = read_wavefunction_csv(p);
        for (std::size_t i = 0; i < psi.grid().size(); ++i) {
          out << series << ',' << format_double(t) << ','
              << format_double(psi.grid().node(i)) << ','
              << format_double(std::norm(psi.values()[i])) << '\n';
        }
      }
    }
  };

  std::ifstream in(run_dir / "manifest.json");
  if (!in) throw MissingArtifactError("missing manifest.json in " + run_dir.string());
  json manifest;
  in >> manifest;
  const bool density = manifest.at("kind").get<std::string>() == "thermo";
  dump_frames(run_dir / "frames", density ? "rho" : "born_density", density);
  dump_frames(run_dir / "frames_tilde", density ? "rho_tilde" : "born_density_tilde",
              density);
}

}  // namespace nsm
