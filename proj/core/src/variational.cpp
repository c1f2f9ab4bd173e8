#include "nsm/variational.hpp"

#include <algorithm>
#include <cmath>

#include "nsm/errors.hpp"
#include "nsm/field_ops.hpp"

namespace nsm {

std::vector<TestFunction> TestFunction::bank() {
  std::vector<TestFunction> bank;
  bank.push_back({"x",
                  [](double x) { return cplx(x, 0.0); },
                  [](double) { return cplx(1.0, 0.0); },
                  [](double) { return cplx(0.0, 0.0); }});
  bank.push_back({"x^2",
                  [](double x) { return cplx(x * x, 0.0); },
                  [](double x) { return cplx(2.0 * x, 0.0); },
                  [](double) { return cplx(2.0, 0.0); }});
  bank.push_back({"sin x",
                  [](double x) { return cplx(std::sin(x), 0.0); },
                  [](double x) { return cplx(std::cos(x), 0.0); },
                  [](double x) { return cplx(-std::sin(x), 0.0); }});
  bank.push_back({"e^{ix}",
                  [](double x) { return std::exp(cplx(0.0, x)); },
                  [](double x) { return cplx(0.0, 1.0) * std::exp(cplx(0.0, x)); },
                  [](double x) { return -std::exp(cplx(0.0, x)); }});
  return bank;
}

double hj_residual(const WavefunctionHistory& history, const ScalarPotential& V,
                   const PhysicalParams& params, double core_fraction) {
  if (history.size() < 3) {
    throw InsufficientDataError("hj_residual: need at least 3 frames");
  }
  const Grid1D& g = history.grid();
  const std::size_t n = g.size();
  const double hbar = params.hbar();
  const double m = params.mass();
  const cplx hbar_over_i(0.0, -hbar);  // hbar/i = -i hbar

  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k + 1 < history.size(); ++k) {
    const auto& psi = history.frame_values(k);
    const auto& prev = history.frame_values(k - 1);
    const auto& next = history.frame_values(k + 1);
    const double dt2 = history.times()[k + 1] - history.times()[k - 1];
    const std::vector<cplx> grad = gradient(g, psi);
    const std::vector<cplx> lap = laplacian(g, psi);

    double max2 = 0.0;
    for (const cplx& z : psi) max2 = std::max(max2, std::norm(z));
    const double core = core_fraction * max2;

    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (std::norm(psi[i]) < core || std::norm(psi[i - 1]) < core ||
          std::norm(psi[i + 1]) < core) {
        continue;
      }
      const cplx r = grad[i] / psi[i];                  // grad psi / psi
      const cplx l = lap[i] / psi[i];                   // lap psi / psi
      const cplx pt = (next[i] - prev[i]) / dt2 / psi[i];
      const cplx dS_dt = hbar_over_i * pt;
      const cplx gradS = hbar_over_i * r;
      const cplx lapS = hbar_over_i * (l - r * r);
      const cplx res = dS_dt + gradS * gradS / (2.0 * m) + V(i) -
                       cplx(0.0, hbar / (2.0 * m)) * lapS;
      acc += std::norm(res);
      ++count;
    }
  }
  if (count == 0) throw InsufficientDataError("hj_residual: empty core region");
  return std::sqrt(acc / static_cast<double>(count));
}

ActionReport action_value(const WavefunctionHistory& history,
                          const ScalarPotential& V, const PhysicalParams& params,
                          const std::vector<cplx>& S0_boundary,
                          double core_fraction) {
  const Grid1D& g = history.grid();
  if (S0_boundary.size() != g.size()) {
    throw ConfigError("action_value: S0 size does not match grid");
  }
  const double m = params.mass();

  // spatial integrals per frame, then trapezoid in time
  std::vector<cplx> kin_t(history.size()), pot_t(history.size());
  for (std::size_t k = 0; k < history.size(); ++k) {
    const Wavefunction psi = history.frame(k);
    const DriftField df = drift_fields(psi, params);
    const auto vq = df.v_q();
    double max2 = 0.0;
    for (const cplx& z : psi.values()) max2 = std::max(max2, std::norm(z));
    const double core = core_fraction * max2;
    std::vector<cplx> ik(g.size(), cplx(0.0, 0.0)), ip(g.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double rho = std::norm(psi.values()[i]);
      if (rho < core) continue;
      ik[i] = 0.5 * m * vq[i] * vq[i] * rho;
      ip[i] = -V(i) * rho;
    }
    kin_t[k] = trapezoid(g, ik);
    pot_t[k] = trapezoid(g, ip);
  }
  auto time_trapezoid = [&](const std::vector<cplx>& f) {
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k + 1 < history.size(); ++k) {
      acc += 0.5 * (f[k] + f[k + 1]) * (history.times()[k + 1] - history.times()[k]);
    }
    return acc;
  };

  ActionReport rep;
  rep.kinetic = time_trapezoid(kin_t);
  rep.potential = time_trapezoid(pot_t);
  std::vector<cplx> boundary(g.size());
  const auto& psi0 = history.frame_values(0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    boundary[i] = S0_boundary[i] * std::norm(psi0[i]);
  }
  rep.boundary = trapezoid(g, boundary);
  rep.value = rep.kinetic + rep.potential + rep.boundary;
  return rep;
}

double LagrangeValue::sigmas() const {
  const double se = std::max(std::hypot(stderr_re, stderr_im), 1e-300);
  return std::abs(value) / se;
}

LagrangeValue lagrange_functional_value(const TrajectoryEnsemble& ens,
                                        const DriftHistory& drifts,
                                        const TestFunction& phi_test,
                                        const PhysicalParams& params,
                                        bool check_consistency) {
  if (ens.direction() != Direction::forward) {
    throw ConfigError("lagrange_functional_value: forward ensemble required");
  }
  const auto& times = ens.times();
  const std::size_t K = times.size();
  if (K < 2) throw InsufficientDataError("lagrange_functional_value: too few steps");
  const double half_s2 = 0.5 * params.sigma_sq();

  // ensemble/drift consistency: mean one-step residual against b+ in units
  // of its standard error
  if (check_consistency) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t cnt = 0;
    const std::size_t stride = std::max<std::size_t>(1, (K - 1) / 8);
    for (std::size_t k = 0; k + 1 < K; k += stride) {
      const double dt = std::abs(times[k + 1] - times[k]);
      for (std::size_t p = 0; p < ens.n_paths(); ++p) {
        const double x = ens.position(p, k);
        const double r =
            ens.position(p, k + 1) - x - drifts.b_plus(x, times[k]) * dt;
        sum += r;
        sum2 += r * r;
        ++cnt;
      }
    }
    const double mean = sum / static_cast<double>(cnt);
    const double var =
        std::max(0.0, sum2 / static_cast<double>(cnt) - mean * mean);
    const double se = std::sqrt(var / static_cast<double>(cnt)) + 1e-300;
    if (std::abs(mean) / se > 5.0) {
      throw InconsistentEnsembleError(
          "lagrange_functional_value: ensemble drift off by " +
          std::to_string(std::abs(mean) / se) + " sigma from supplied field");
    }
  }

  double sum_re = 0.0, sum2_re = 0.0, sum_im = 0.0, sum2_im = 0.0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    const double x_first = ens.position(p, 0);
    const double x_last = ens.position(p, K - 1);
    cplx current_part = phi_test.phi(x_last) - phi_test.phi(x_first);
    cplx osmotic_part(0.0, 0.0);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      const double dt = std::abs(times[k + 1] - times[k]);
      const double x = ens.position(p, k);
      const cplx gphi = phi_test.grad(x);
      const cplx lphi = phi_test.lap(x);
      current_part -= dt * (phi_test.dphi_dt(x) + drifts.v(x, times[k]) * gphi);
      osmotic_part += dt * (drifts.u(x, times[k]) * gphi + half_s2 * lphi);
    }
    const cplx lam = current_part + cplx(0.0, 1.0) * osmotic_part;
    sum_re += lam.real();
    sum2_re += lam.real() * lam.real();
    sum_im += lam.imag();
    sum2_im += lam.imag() * lam.imag();
  }
  const auto N = static_cast<double>(ens.n_paths());
  LagrangeValue out;
  const double mean_re = sum_re / N;
  const double mean_im = sum_im / N;
  out.value = cplx(mean_re, mean_im);
  out.stderr_re = std::sqrt(std::max(0.0, sum2_re / N - mean_re * mean_re) / N);
  out.stderr_im = std::sqrt(std::max(0.0, sum2_im / N - mean_im * mean_im) / N);
  return out;
}

}  // namespace nsm
