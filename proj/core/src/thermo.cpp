#include "nsm/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsm/errors.hpp"
#include "nsm/estimators.hpp"
#include "nsm/field_ops.hpp"
#include "nsm/sampler.hpp"

namespace nsm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Bernoulli function z/(e^z - 1), stable near 0.
double bernoulli_fn(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z + z * z / 12.0;
  return z / std::expm1(z);
}
}  // namespace

ThermoParams::ThermoParams(double kT_, double sigma_sq_, ScalarPotential H_)
    : kT(kT_), sigma_sq(sigma_sq_), H(std::move(H_)) {
  if (!(kT > 0.0)) throw ConfigError("ThermoParams: kT must be > 0");
  if (!(sigma_sq > 0.0)) throw ConfigError("ThermoParams: sigma_sq must be > 0");
}

DensityHistory::DensityHistory(const Grid1D& g, std::vector<double> times,
                               std::vector<std::vector<double>> frames)
    : grid_(g), times_(std::move(times)), frames_(std::move(frames)) {
  if (times_.empty() || times_.size() != frames_.size()) {
    throw ConfigError("DensityHistory: times/frames mismatch");
  }
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (!(times_[k] < times_[k + 1])) {
      throw ConfigError("DensityHistory: times must be strictly increasing");
    }
  }
}

std::size_t DensityHistory::nearest_frame(double t) const {
  std::size_t best = 0;
  double best_d = std::abs(times_[0] - t);
  for (std::size_t k = 1; k < times_.size(); ++k) {
    const double d = std::abs(times_[k] - t);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

DensityHistory DensityHistory::restricted(double t0, double t1) const {
  const double eps = 1e-12 * std::max(1.0, std::abs(t1));
  std::vector<double> ts;
  std::vector<std::vector<double>> fs;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (times_[k] >= t0 - eps && times_[k] <= t1 + eps) {
      ts.push_back(times_[k]);
      fs.push_back(frames_[k]);
    }
  }
  return DensityHistory(grid_, std::move(ts), std::move(fs));
}

Density equilibrium_density(const ThermoParams& tp) {
  const Grid1D& g = tp.H.grid();
  const double h_min = *std::min_element(tp.H.values().begin(), tp.H.values().end());
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    v[i] = std::exp(-(tp.H(i) - h_min) / tp.kT);
    if (!std::isfinite(v[i])) {
      throw NotNormalizableError("equilibrium_density: non-finite weight");
    }
  }
  const double mass = trapezoid(g, v);
  if (!(mass > 1e-300) || !std::isfinite(mass)) {
    throw NotNormalizableError("equilibrium_density: zero or non-finite mass");
  }
  for (double& x : v) x /= mass;
  return Density(g, std::move(v), 0.0);
}

DriftField forward_drift_from_H(const ThermoParams& tp) {
  const Grid1D& g = tp.H.grid();
  std::vector<double> grad_h = gradient(g, tp.H.values());
  const double scale = -tp.sigma_sq / (2.0 * tp.kT);
  for (double& x : grad_h) x *= scale;
  return DriftField::from_b_plus(g, 0.0, std::move(grad_h));
}

namespace {

// Tridiagonal Thomas solve, general diagonals. rhs is overwritten.
void solve_tridiag(const std::vector<double>& sub, const std::vector<double>& diag,
                   const std::vector<double>& sup, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n, 0.0);
  double piv = diag[0];
  if (std::abs(piv) < 1e-300) throw LinearSolveFailure("fp: pivot underflow");
  c[0] = sup[0] / piv;
  rhs[0] /= piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - sub[i] * c[i - 1];
    if (std::abs(piv) < 1e-300) throw LinearSolveFailure("fp: pivot underflow");
    c[i] = sup[i] / piv;
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / piv;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace

DensityHistory fokker_planck_propagate(const Density& rho0, const DriftField& b_plus,
                                       double sigma_sq, double t0, double t1,
                                       double dt, const FokkerPlanckConfig& cfg) {
  if (!(t1 >= t0)) throw ConfigError("fokker_planck_propagate: t1 must be >= t0");
  if (!(dt > 0.0)) throw ConfigError("fokker_planck_propagate: dt must be > 0");
  const Grid1D& g = rho0.grid();
  if (b_plus.grid() != g) throw ConfigError("fokker_planck_propagate: grid mismatch");
  const std::size_t n = g.size();
  const double dx = g.dx();
  const double D = 0.5 * sigma_sq;

  // Exponentially fitted (Scharfetter-Gummel) interface fluxes:
  //   F_{i+1/2} = (D/dx) [B(-w_i) rho_i - B(w_i) rho_{i+1}],
  //   w_i = b_{i+1/2} dx / D,
  // which makes rho_{i+1}/rho_i = e^{w_i} the discrete stationary profile.
  const auto& b = b_plus.b_plus();
  std::vector<double> bm(n - 1), bp(n - 1);  // B(-w), B(w) per interface
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double w = 0.5 * (b[i] + b[i + 1]) * dx / D;
    bm[i] = bernoulli_fn(-w);
    bp[i] = bernoulli_fn(w);
  }

  // generator L (no-flux ends): h_i d(rho_i)/dt = F_{i-1/2} - F_{i+1/2}
  std::vector<double> cell(n, dx);
  cell.front() = cell.back() = 0.5 * dx;
  std::vector<double> L_sub(n, 0.0), L_diag(n, 0.0), L_sup(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double inv = D / (dx * cell[i]);
    if (i > 0) {
      L_sub[i] = inv * bm[i - 1];
      L_diag[i] -= inv * bp[i - 1];
    }
    if (i + 1 < n) {
      L_sup[i] = inv * bp[i];
      L_diag[i] -= inv * bm[i];
    }
  }

  // positivity bound of the explicit part
  if (cfg.theta < 1.0) {
    double max_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_rate = std::max(max_rate, -L_diag[i]);
    const double dt_max = 1.0 / ((1.0 - cfg.theta) * max_rate);
    if (dt > dt_max * (1.0 + 1e-12)) {
      throw StabilityViolationError(
          "fokker_planck_propagate: dt " + std::to_string(dt) +
          " above positivity bound " + std::to_string(dt_max));
    }
  }

  std::vector<double> rho = rho0.values();
  std::vector<double> times;
  std::vector<std::vector<double>> frames;
  times.push_back(t0);
  frames.push_back(rho);
  if (t1 == t0) return DensityHistory(g, std::move(times), std::move(frames));

  const double span = t1 - t0;
  const auto n_steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  std::vector<double> sub(n), diag(n), sup(n), rhs(n);
  double t_cur = t0;
  for (std::size_t s = 0; s < n_steps; ++s) {
    const double t_next = (s + 1 == n_steps) ? t1 : t0 + static_cast<double>(s + 1) * dt;
    const double step_dt = t_next - t_cur;
    // theta scheme: (I - theta dt L) rho' = (I + (1-theta) dt L) rho
    for (std::size_t i = 0; i < n; ++i) {
      sub[i] = -cfg.theta * step_dt * L_sub[i];
      diag[i] = 1.0 - cfg.theta * step_dt * L_diag[i];
      sup[i] = -cfg.theta * step_dt * L_sup[i];
      double r = (1.0 + (1.0 - cfg.theta) * step_dt * L_diag[i]) * rho[i];
      if (i > 0) r += (1.0 - cfg.theta) * step_dt * L_sub[i] * rho[i - 1];
      if (i + 1 < n) r += (1.0 - cfg.theta) * step_dt * L_sup[i] * rho[i + 1];
      rhs[i] = r;
    }
    solve_tridiag(sub, diag, sup, rhs);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(rhs[i])) {
        throw LinearSolveFailure("fokker_planck_propagate: non-finite solution");
      }
      rho[i] = std::max(rhs[i], 0.0);
    }
    t_cur = t_next;
    if ((s + 1) % cfg.checkpoint_stride == 0 || s + 1 == n_steps) {
      times.push_back(t_next);
      frames.push_back(rho);
    }
  }
  return DensityHistory(g, std::move(times), std::move(frames));
}

DriftField backward_drift_field(const Density& rho, const DriftField& b_plus,
                                double sigma_sq, const DriftOptions& opt) {
  const Grid1D& g = rho.grid();
  if (b_plus.grid() != g) throw ConfigError("backward_drift_field: grid mismatch");
  const auto& r = rho.values();
  const double peak = *std::max_element(r.begin(), r.end());
  const double floor = opt.node_floor_rel * peak;
  const std::vector<double> grad_rho = gradient(g, r);

  std::vector<double> v(g.size()), u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double osmotic = 0.0;  // (sigma^2/2) grad log rho
    if (r[i] > floor) {
      osmotic = std::clamp(0.5 * sigma_sq * grad_rho[i] / r[i], -opt.drift_cap,
                           opt.drift_cap);
    }
    u[i] = osmotic;
    v[i] = b_plus.b_plus()[i] - osmotic;
  }
  // b+ = v + u reproduces the input exactly; b- = v - u = b+ - sigma^2 grad log rho
  return DriftField(g, rho.time(), std::move(v), std::move(u));
}

ClassicalMeasurementResult classical_measurement(
    const DensityHistory& reference, const DriftField& b_plus,
    const MeasurementEvent& ev, double sigma_sq, double t2, double dt,
    const FokkerPlanckConfig& cfg) {
  const double t1 = ev.time;
  if (t1 < reference.t_begin() - 1e-9 || t2 > reference.t_end() + 1e-9) {
    throw ConfigError("classical_measurement: [t1, t2] outside reference history");
  }
  const std::size_t k1 = reference.nearest_frame(t1);
  if (std::abs(reference.times()[k1] - t1) > 1e-9) {
    throw ConfigError("classical_measurement: no reference frame at event time");
  }
  const Density rho1 = reference.frame(k1);
  const Density rho_tilde1 = bayes_posterior(rho1, ev);

  const DensityHistory ref_window = reference.restricted(t1, t2);

  // propagate the posterior with the SAME forward drift, checkpointing at
  // the reference frame times
  std::vector<double> times;
  std::vector<std::vector<double>> frames;
  times.push_back(ref_window.times().front());
  frames.push_back(rho_tilde1.values());
  Density rho = rho_tilde1;
  for (std::size_t k = 1; k < ref_window.size(); ++k) {
    const double target = ref_window.times()[k];
    FokkerPlanckConfig leg_cfg = cfg;
    leg_cfg.checkpoint_stride = std::numeric_limits<std::size_t>::max();
    const DensityHistory leg = fokker_planck_propagate(
        rho.with_time(times.back()), b_plus, sigma_sq, times.back(), target, dt,
        leg_cfg);
    rho = leg.frame(leg.size() - 1);
    times.push_back(target);
    frames.push_back(rho.values());
  }
  DensityHistory tilde_history(reference.grid(), std::move(times), std::move(frames));

  // phi = -log(rho~/rho) where both are above the floor
  const double floor_rel = 1e-12;
  std::vector<std::vector<double>> phi(tilde_history.size());
  for (std::size_t k = 0; k < tilde_history.size(); ++k) {
    const auto& a = tilde_history.frame_values(k);
    const auto& b = ref_window.frame_values(k);
    const double fa = floor_rel * *std::max_element(a.begin(), a.end());
    const double fb = floor_rel * *std::max_element(b.begin(), b.end());
    phi[k].assign(a.size(), kNaN);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] > fa && b[i] > fb) phi[k][i] = -std::log(a[i] / b[i]);
    }
  }

  return ClassicalMeasurementResult{rho_tilde1,
                                    std::move(tilde_history),
                                    ref_window,
                                    b_plus,
                                    ref_window.times(),
                                    std::move(phi),
                                    floor_rel};
}

ResidualReport thermo_pde_residual(const ClassicalMeasurementResult& result,
                                   double sigma_sq, double core_fraction) {
  const DensityHistory& ref = result.reference_history;
  const DensityHistory& tilde = result.rho_tilde_history;
  const Grid1D& g = ref.grid();
  const std::size_t n = g.size();
  const auto& phi = result.phi;
  if (phi.size() < 3) {
    throw InsufficientDataError("thermo_pde_residual: need at least 3 frames");
  }

  ResidualReport rep;
  // initial condition: phi(t1) + log(rho~/rho)(t1) = 0
  {
    const auto& a = tilde.frame_values(0);
    const auto& b = ref.frame_values(0);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(phi[0][i])) continue;
      rep.ic_max_dev =
          std::max(rep.ic_max_dev, std::abs(phi[0][i] + std::log(a[i] / b[i])));
    }
  }

  const double D = 0.5 * sigma_sq;
  const double h = g.dx();
  for (std::size_t k = 1; k + 1 < phi.size(); ++k) {
    const double dt2 = result.phi_times[k + 1] - result.phi_times[k - 1];
    const Density rho_k = ref.frame(k);
    const DriftField bwd = backward_drift_field(rho_k, result.b_plus, sigma_sq);
    const auto& b_minus = bwd.b_minus();

    const auto& a = tilde.frame_values(k);
    const auto& b = ref.frame_values(k);
    const double ca = core_fraction * *std::max_element(a.begin(), a.end());
    const double cb = core_fraction * *std::max_element(b.begin(), b.end());
    auto valid = [&](std::size_t i) {
      return !std::isnan(phi[k][i]) && !std::isnan(phi[k - 1][i]) &&
             !std::isnan(phi[k + 1][i]) && a[i] >= ca && b[i] >= cb;
    };
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (!valid(i) || !valid(i - 1) || !valid(i + 1)) continue;
      const double dphi_dt = (phi[k + 1][i] - phi[k - 1][i]) / dt2;
      const double grad = (phi[k][i + 1] - phi[k][i - 1]) / (2.0 * h);
      const double lap = (phi[k][i + 1] - 2.0 * phi[k][i] + phi[k][i - 1]) / (h * h);
      const double r = dphi_dt + b_minus[i] * grad - D * lap + D * grad * grad;
      rep.rms += r * r;
      ++rep.n_points;
    }
  }
  if (rep.n_points == 0) {
    throw InsufficientDataError("thermo_pde_residual: empty core region");
  }
  rep.rms = std::sqrt(rep.rms / static_cast<double>(rep.n_points));
  return rep;
}

KlMinimalityReport kl_minimality_check(const DensityHistory& reference,
                                       const DriftField& b_plus,
                                       const MeasurementEvent& ev,
                                       const std::vector<DriftCandidate>& candidates,
                                       double sigma_sq, double t2,
                                       std::size_t n_paths, double dt,
                                       std::uint64_t seed) {
  const double t1 = ev.time;
  const std::size_t k1 = reference.nearest_frame(t1);
  const Density rho1 = reference.frame(k1);
  const Density rho_tilde1 = bayes_posterior(rho1, ev);
  const Grid1D& g = reference.grid();

  KlMinimalityReport rep;
  rep.marginal_kl = relative_entropy(rho_tilde1, rho1);

  const PhysicalParams diffusion(sigma_sq, 1.0);  // sigma^2 = hbar/m
  const DriftHistory ref_drift({b_plus});

  auto eval_candidate = [&](const std::vector<double>& grad_phi,
                            double eps) -> double {
    std::vector<double> beta(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      beta[i] = b_plus.b_plus()[i] + eps * grad_phi[i];
    }
    const DriftHistory cand_drift({DriftField::from_b_plus(g, t1, beta)});
    SamplerConfig scfg;
    scfg.n_paths = n_paths;
    scfg.dt = dt;
    scfg.seed = seed;
    const TrajectoryEnsemble ens =
        sample_forward(rho_tilde1, cand_drift, diffusion, t1, t2, scfg);
    return pathwise_kl(ens, cand_drift, ref_drift, rho_tilde1, rho1, diffusion);
  };

  rep.optimal_kl = eval_candidate(std::vector<double>(g.size(), 0.0), 0.0);
  for (const auto& cand : candidates) {
    if (cand.grad_phi.size() != g.size()) {
      throw ConfigError("kl_minimality_check: candidate field size mismatch");
    }
    const double kl = eval_candidate(cand.grad_phi, cand.epsilon);
    rep.candidates.push_back({cand.label, cand.epsilon, kl, kl - rep.optimal_kl});
  }
  return rep;
}

}  // namespace nsm
