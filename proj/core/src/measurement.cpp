#include "nsm/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsm/errors.hpp"

namespace nsm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// C^3 ramp, 0 at u<=0 and 1 at u>=1. The extra smoothness keeps the
// mollified window's spectral tail at k^-4, which the second-order
// convergence studies rely on.
double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double u2 = u * u;
  return u2 * u2 * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u)));
}
}  // namespace

MeasurementEvent MeasurementEvent::window(
    double t, std::vector<std::pair<double, double>> ivals, double mollify_width) {
  MeasurementEvent ev;
  ev.time = t;
  ev.mollify_width = mollify_width;
  std::sort(ivals.begin(), ivals.end());
  for (std::size_t i = 0; i < ivals.size(); ++i) {
    if (!(ivals[i].first < ivals[i].second)) {
      throw ConfigError("MeasurementEvent: window interval must have a < b");
    }
    if (i > 0 && !(ivals[i - 1].second < ivals[i].first)) {
      throw ConfigError("MeasurementEvent: window intervals must be disjoint");
    }
  }
  if (ivals.empty()) throw ConfigError("MeasurementEvent: empty window list");
  ev.windows = std::move(ivals);
  return ev;
}

MeasurementEvent MeasurementEvent::from_posterior(double t, Density rho) {
  MeasurementEvent ev;
  ev.time = t;
  ev.posterior = std::move(rho);
  return ev;
}

std::vector<double> window_weight(const Grid1D& g, const MeasurementEvent& ev) {
  std::vector<double> w(g.size(), 0.0);
  const double width = ev.mollify_width;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    double s = 0.0;
    for (const auto& [a, b] : ev.windows) {
      if (x < a || x > b) continue;
      if (width <= 0.0) {
        s = 1.0;
      } else {
        // inward ramps at both edges keep the support inside [a, b]
        s = smoothstep((x - a) / width) * smoothstep((b - x) / width);
      }
      break;
    }
    w[i] = s;
  }
  return w;
}

Density bayes_posterior(const Density& rho, const MeasurementEvent& ev) {
  if (!ev.is_window()) {
    if (!ev.posterior) throw ConfigError("bayes_posterior: event has no posterior");
    const Density& post = *ev.posterior;
    if (post.grid() != rho.grid()) {
      throw ConfigError("bayes_posterior: posterior grid mismatch");
    }
    return post.normalized().with_time(ev.time);
  }
  const Grid1D& g = rho.grid();
  const std::vector<double> w = window_weight(g, ev);
  std::vector<double> masked(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) masked[i] = w[i] * rho.values()[i];
  const double mass = trapezoid(g, masked);
  if (mass < ev.min_mass) {
    throw NegligibleMassError("bayes_posterior: window mass " +
                              std::to_string(mass) + " below min_mass");
  }
  for (double& v : masked) v /= mass;
  return Density(g, std::move(masked), ev.time);
}

Wavefunction collapse_wavefunction(const Wavefunction& psi, const Density& rho_tilde,
                                   const CollapseOptions& opt) {
  if (psi.grid() != rho_tilde.grid()) {
    throw ConfigError("collapse_wavefunction: grid mismatch");
  }
  const auto& u = psi.values();
  const auto& rt = rho_tilde.values();
  const double psi_floor = opt.psi_floor_rel * psi.max_abs();
  const double rho_floor =
      opt.rho_floor_rel * *std::max_element(rt.begin(), rt.end());

  std::vector<cplx> out(u.size(), cplx(0.0, 0.0));
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (rt[i] <= rho_floor) continue;
    const double mod = std::abs(u[i]);
    if (mod <= psi_floor) {
      throw PhaseUndefinedError(
          "collapse_wavefunction: posterior mass at node " + std::to_string(i) +
          " where |psi| is below the phase floor");
    }
    out[i] = std::sqrt(rt[i]) * (u[i] / mod);
  }
  return Wavefunction(psi.grid(), std::move(out), rho_tilde.time());
}

std::vector<std::vector<cplx>> log_ratio_history(
    const WavefunctionHistory& tilde, const WavefunctionHistory& ref,
    const CollapseOptions& opt, const std::vector<char>* branch_mask) {
  const std::size_t n = tilde.grid().size();
  std::vector<std::vector<cplx>> phi(tilde.size(),
                                     std::vector<cplx>(n, cplx(kNaN, kNaN)));
  std::vector<double> prev_arg(n, kNaN);
  for (std::size_t k = 0; k < tilde.size(); ++k) {
    const auto& a = tilde.frame_values(k);
    const auto& b = ref.frame_values(k);
    double amax = 0.0, bmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      amax = std::max(amax, std::abs(a[i]));
      bmax = std::max(bmax, std::abs(b[i]));
    }
    const double afloor = opt.psi_floor_rel * amax;
    const double bfloor = opt.psi_floor_rel * bmax;
    const double core_a = opt.core_fraction * amax * amax;
    const double core_b = opt.core_fraction * bmax * bmax;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(a[i]) <= afloor || std::abs(b[i]) <= bfloor) {
        prev_arg[i] = kNaN;
        continue;
      }
      const cplx ratio = a[i] / b[i];
      double theta = std::arg(ratio);
      const bool on_core =
          branch_mask ? (*branch_mask)[i] != 0
                      : std::norm(a[i]) >= core_a && std::norm(b[i]) >= core_b;
      if (!std::isnan(prev_arg[i])) {
        const double two_pi = 2.0 * M_PI;
        theta += two_pi * std::round((prev_arg[i] - theta) / two_pi);
        if (on_core && std::abs(theta - prev_arg[i]) > M_PI / 2.0) {
          throw BranchAmbiguityError(
              "log_ratio_history: phase jump over pi/2 between frames at node " +
              std::to_string(i));
        }
      }
      phi[k][i] = cplx(std::log(std::abs(ratio)), theta);
      prev_arg[i] = theta;
    }
  }
  return phi;
}

CollapseResult post_measurement_process(const WavefunctionHistory& reference,
                                        const MeasurementEvent& ev,
                                        const ScalarPotential& V,
                                        const PhysicalParams& params, double dt,
                                        double t2, const CollapseOptions& opt) {
  const double t1 = ev.time;
  if (t1 < reference.t_begin() - 1e-9 || t1 > reference.t_end() + 1e-9) {
    throw ConfigError("post_measurement_process: event time outside reference");
  }
  if (t2 > reference.t_end() + 1e-9) {
    throw ConfigError("post_measurement_process: t2 beyond reference history");
  }
  const std::size_t k1 = reference.nearest_frame(t1);
  if (std::abs(reference.times()[k1] - t1) > 1e-9) {
    throw ConfigError("post_measurement_process: no reference frame at event time");
  }

  const Wavefunction psi1 = reference.frame(k1);
  const Density rho1 = born_density(psi1);
  const Density rho_tilde = bayes_posterior(rho1, ev);
  const Wavefunction psi_tilde1 = collapse_wavefunction(psi1, rho_tilde, opt);

  const WavefunctionHistory ref_window = reference.restricted(t1, t2);

  // march psi_tilde checkpointing exactly at the reference frame times
  std::vector<double> times;
  std::vector<std::vector<cplx>> frames;
  times.push_back(ref_window.times().front());
  frames.push_back(psi_tilde1.values());
  Wavefunction psi = psi_tilde1;
  for (std::size_t k = 1; k < ref_window.size(); ++k) {
    const double target = ref_window.times()[k];
    const WavefunctionHistory leg =
        propagate(psi, V, params, psi.time(), target, dt,
                  std::numeric_limits<std::size_t>::max());
    psi = leg.frame(leg.size() - 1);
    times.push_back(target);
    frames.push_back(psi.values());
  }
  WavefunctionHistory tilde_history(reference.grid(), std::move(times),
                                    std::move(frames));

  // evaluated region: psi_tilde(t1) on core, clear of every interior cut
  const Grid1D& g = reference.grid();
  std::vector<char> core_mask(g.size(), 0);
  {
    const auto& first = tilde_history.frame_values(0);
    double max2 = 0.0;
    for (const cplx& z : first) max2 = std::max(max2, std::norm(z));
    const double core = opt.core_fraction * max2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::norm(first[i]) < core) continue;
      bool near_cut = false;
      for (const auto& [a, b] : ev.windows) {
        if (a > g.x_min() && std::abs(g.node(i) - a) < opt.cut_margin) near_cut = true;
        if (b < g.x_max() && std::abs(g.node(i) - b) < opt.cut_margin) near_cut = true;
      }
      core_mask[i] = near_cut ? 0 : 1;
    }
  }

  auto phi = log_ratio_history(tilde_history, ref_window, opt, &core_mask);
  return CollapseResult{rho_tilde,
                        std::move(tilde_history),
                        ref_window,
                        ref_window.times(),
                        std::move(phi),
                        std::move(core_mask),
                        opt};
}

double repetition_probability(const CollapseResult& result,
                              const std::vector<std::pair<double, double>>& D,
                              std::optional<double> at_time) {
  const WavefunctionHistory& h = result.psi_tilde_history;
  const std::size_t k = at_time ? h.nearest_frame(*at_time) : 0;
  const Grid1D& g = h.grid();
  const auto& u = h.frame_values(k);
  std::vector<double> masked(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    for (const auto& [a, b] : D) {
      if (x >= a && x <= b) {
        masked[i] = std::norm(u[i]);
        break;
      }
    }
  }
  return trapezoid(g, masked);
}

ResidualReport collapse_pde_residual(const CollapseResult& result,
                                     const PhysicalParams& params) {
  const WavefunctionHistory& ref = result.reference_history;
  const WavefunctionHistory& tilde = result.psi_tilde_history;
  const Grid1D& g = ref.grid();
  const std::size_t n = g.size();
  const auto& phi = result.phi;
  if (phi.size() < 3) {
    throw InsufficientDataError("collapse_pde_residual: need at least 3 frames");
  }

  ResidualReport rep;

  // initial condition: phi(t1) = (1/2) log(rho_tilde/rho)
  {
    const auto& p0 = phi.front();
    const auto& psi1 = ref.frame_values(0);
    const auto& rt = result.rho_tilde_t1.values();
    const double rho_floor =
        result.options.rho_floor_rel *
        *std::max_element(rt.begin(), rt.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(p0[i].real()) || rt[i] <= rho_floor) continue;
      const double rho_i = std::norm(psi1[i]);
      if (rho_i <= 0.0) continue;
      const cplx expected(0.5 * std::log(rt[i] / rho_i), 0.0);
      rep.ic_max_dev = std::max(rep.ic_max_dev, std::abs(p0[i] - expected));
    }
  }

  const cplx i_hbar_2m(0.0, params.hbar() / (2.0 * params.mass()));
  double acc = 0.0;
  for (std::size_t k = 1; k + 1 < phi.size(); ++k) {
    const double dt2 = result.phi_times[k + 1] - result.phi_times[k - 1];
    const Wavefunction psi_k = ref.frame(k);
    const DriftField df = drift_fields(psi_k, params);
    const auto vq = df.v_q();

    // evaluated region plus per-frame core of both histories
    const auto& a = tilde.frame_values(k);
    const auto& b = ref.frame_values(k);
    double amax2 = 0.0, bmax2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      amax2 = std::max(amax2, std::norm(a[i]));
      bmax2 = std::max(bmax2, std::norm(b[i]));
    }
    const double ca = result.options.core_fraction * amax2;
    const double cb = result.options.core_fraction * bmax2;
    auto valid = [&](std::size_t i) {
      return result.core_mask[i] != 0 && !std::isnan(phi[k][i].real()) &&
             !std::isnan(phi[k - 1][i].real()) &&
             !std::isnan(phi[k + 1][i].real()) && std::norm(a[i]) >= ca &&
             std::norm(b[i]) >= cb;
    };

    const double h = g.dx();
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (!valid(i) || !valid(i - 1) || !valid(i + 1)) continue;
      const cplx dphi_dt = (phi[k + 1][i] - phi[k - 1][i]) / dt2;
      const cplx grad = (phi[k][i + 1] - phi[k][i - 1]) / (2.0 * h);
      const cplx lap =
          (phi[k][i + 1] - 2.0 * phi[k][i] + phi[k][i - 1]) / (h * h);
      const cplx r = dphi_dt + vq[i] * grad - i_hbar_2m * lap -
                     i_hbar_2m * grad * grad;
      acc += std::norm(r);
      ++rep.n_points;
    }
  }
  if (rep.n_points == 0) {
    throw InsufficientDataError("collapse_pde_residual: empty core region");
  }
  rep.rms = std::sqrt(acc / static_cast<double>(rep.n_points));
  return rep;
}

}  // namespace nsm
