#include "nsm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsm/errors.hpp"
#include "nsm/field_ops.hpp"

namespace nsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BinGrid {
  double lo, width;
  std::size_t n;

  std::size_t index(double x) const {
    const auto i = static_cast<long long>((x - lo) / width);
    return static_cast<std::size_t>(
        std::clamp(i, 0LL, static_cast<long long>(n) - 1));
  }
  double center(std::size_t b) const {
    return lo + (static_cast<double>(b) + 0.5) * width;
  }
};

BinGrid make_bins(const Grid1D& g, std::size_t n_bins) {
  return BinGrid{g.x_min(), (g.x_max() - g.x_min()) / static_cast<double>(n_bins),
                 n_bins};
}

// Per-bin mean and stderr of per-path samples (x_at, value).
BinnedField bin_statistic(const BinGrid& bg, const std::vector<double>& x,
                          const std::vector<double>& val) {
  BinnedField out;
  out.centers.resize(bg.n);
  out.counts.assign(bg.n, 0);
  out.values.assign(bg.n, kNaN);
  out.stderrs.assign(bg.n, kNaN);
  std::vector<double> sum(bg.n, 0.0), sum2(bg.n, 0.0);
  for (std::size_t b = 0; b < bg.n; ++b) out.centers[b] = bg.center(b);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const std::size_t b = bg.index(x[j]);
    ++out.counts[b];
    sum[b] += val[j];
    sum2[b] += val[j] * val[j];
  }
  for (std::size_t b = 0; b < bg.n; ++b) {
    if (out.counts[b] == 0) continue;
    const auto c = static_cast<double>(out.counts[b]);
    const double m = sum[b] / c;
    out.values[b] = m;
    if (out.counts[b] > 1) {
      const double var = std::max(0.0, (sum2[b] - c * m * m) / (c - 1.0));
      out.stderrs[b] = std::sqrt(var / c);
    }
  }
  return out;
}

}  // namespace

std::size_t BinnedField::total_count() const {
  std::size_t c = 0;
  for (auto k : counts) c += k;
  return c;
}

Density empirical_density(const TrajectoryEnsemble& ens, double t,
                          std::size_t n_bins) {
  if (ens.n_paths() == 0) throw EmptyEnsembleError("empirical_density: no paths");
  const std::size_t k = ens.time_index(t);
  const Grid1D& g = ens.grid();
  const BinGrid bg = make_bins(g, n_bins);

  std::vector<double> mass(n_bins, 0.0);
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    mass[bg.index(ens.position(p, k))] += 1.0;
  }
  const double norm = static_cast<double>(ens.n_paths()) * bg.width;
  for (double& m : mass) m /= norm;

  // piecewise-linear resample from bin centers onto the grid
  std::vector<double> rho(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    const double u = (x - bg.lo) / bg.width - 0.5;
    if (u <= 0.0) {
      rho[i] = mass.front();
    } else if (u >= static_cast<double>(n_bins - 1)) {
      rho[i] = mass.back();
    } else {
      const auto b = static_cast<std::size_t>(u);
      const double a = u - static_cast<double>(b);
      rho[i] = (1.0 - a) * mass[b] + a * mass[b + 1];
    }
  }
  return Density(g, std::move(rho), ens.times()[k]).normalized();
}

namespace {

// Collect (x(t), finite difference) pairs; sign = +1 uses (t, t+dt),
// sign = -1 uses (t-dt, t). Conditioning position is always x(t).
void collect_increments(const TrajectoryEnsemble& ens, double t, int sign,
                        std::vector<double>& x_at, std::vector<double>& deriv) {
  const std::size_t k = ens.time_index(t);
  const auto& times = ens.times();
  // locate the stored neighbor at t + sign*dt in physical time
  const double target = times[k] + static_cast<double>(sign) * ens.dt();
  std::size_t kn = k;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double d = std::abs(times[j] - target);
    if (d < best) {
      best = d;
      kn = j;
    }
  }
  if (kn == k || best > 1e-9 + 1e-6 * ens.dt()) {
    throw InsufficientDataError("drift estimate: required neighbor time not stored");
  }
  const double dt_phys = times[kn] - times[k];  // signed
  x_at.resize(ens.n_paths());
  deriv.resize(ens.n_paths());
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    x_at[p] = ens.position(p, k);
    deriv[p] = (ens.position(p, kn) - x_at[p]) / dt_phys;
  }
}

}  // namespace

BinnedField estimate_forward_drift(const TrajectoryEnsemble& ens, double t,
                                   std::size_t n_bins) {
  std::vector<double> x, d;
  collect_increments(ens, t, +1, x, d);
  return bin_statistic(make_bins(ens.grid(), n_bins), x, d);
}

BinnedField estimate_backward_drift(const TrajectoryEnsemble& ens, double t,
                                    std::size_t n_bins) {
  std::vector<double> x, d;
  collect_increments(ens, t, -1, x, d);
  return bin_statistic(make_bins(ens.grid(), n_bins), x, d);
}

std::pair<double, double> weighted_regression(const std::vector<double>& x,
                                              const std::vector<double>& y,
                                              const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) {
    throw InsufficientDataError("regression: degenerate design");
  }
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;
  return {slope, intercept};
}

DualityReport duality_residual(const TrajectoryEnsemble& ens, double t,
                               const PhysicalParams& params,
                               const EstimatorOptions& opt) {
  const BinGrid bg = make_bins(ens.grid(), opt.n_bins);
  const BinnedField fwd = estimate_forward_drift(ens, t, opt.n_bins);
  const BinnedField bwd = estimate_backward_drift(ens, t, opt.n_bins);

  // bin probabilities and the density log-gradient on bin centers
  const std::size_t k = ens.time_index(t);
  std::vector<double> rho_hat(opt.n_bins, 0.0);
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    rho_hat[bg.index(ens.position(p, k))] += 1.0;
  }
  for (double& r : rho_hat) r /= static_cast<double>(ens.n_paths()) * bg.width;
  const double peak = *std::max_element(rho_hat.begin(), rho_hat.end());
  const double core = opt.core_fraction * peak;

  std::vector<double> grad_log(opt.n_bins, kNaN);
  for (std::size_t b = 1; b + 1 < opt.n_bins; ++b) {
    if (rho_hat[b - 1] > opt.density_floor && rho_hat[b + 1] > opt.density_floor) {
      grad_log[b] = (std::log(rho_hat[b + 1]) - std::log(rho_hat[b - 1])) /
                    (2.0 * bg.width);
    }
  }

  DualityReport rep;
  std::vector<double> xs, ys, ws;
  const double s2 = params.sigma_sq();
  double wsum = 0.0, rss = 0.0;
  for (std::size_t b = 1; b + 1 < opt.n_bins; ++b) {
    if (rho_hat[b] <= core) continue;
    if (!fwd.occupied(b) || !bwd.occupied(b) || std::isnan(grad_log[b])) continue;
    const double lhs = fwd.values[b] - bwd.values[b];
    const double rhs = s2 * grad_log[b];
    const double w = static_cast<double>(fwd.counts[b]);
    xs.push_back(rhs);
    ys.push_back(lhs);
    ws.push_back(w);
    rep.centers.push_back(bg.center(b));
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    wsum += w;
    rss += w * (lhs - rhs) * (lhs - rhs);
  }
  rep.n_core_bins = xs.size();
  if (rep.n_core_bins < 3) {
    throw InsufficientDataError("duality_residual: fewer than 3 core bins");
  }
  std::tie(rep.slope, rep.intercept) = weighted_regression(xs, ys, ws);
  rep.rms = std::sqrt(rss / wsum);
  return rep;
}

double continuity_residual(const WavefunctionHistory& history,
                           const PhysicalParams& params) {
  if (history.size() < 3) {
    throw InsufficientDataError("continuity_residual: need at least 3 frames");
  }
  const Grid1D& g = history.grid();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k + 1 < history.size(); ++k) {
    const auto& prev = history.frame_values(k - 1);
    const auto& next = history.frame_values(k + 1);
    const double dt2 = history.times()[k + 1] - history.times()[k - 1];
    const Wavefunction psi = history.frame(k);
    const DriftField df = drift_fields(psi, params);
    std::vector<double> flux(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      flux[i] = df.v()[i] * std::norm(psi.values()[i]);
    }
    const std::vector<double> div = gradient(g, flux);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double drho_dt = (std::norm(next[i]) - std::norm(prev[i])) / dt2;
      const double r = drho_dt + div[i];
      acc += r * r;
      ++count;
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

double relative_entropy(const Density& p, const Density& q, double density_floor,
                        double support_tol) {
  if (p.grid() != q.grid()) throw ConfigError("relative_entropy: grid mismatch");
  const Grid1D& g = p.grid();
  std::vector<double> integrand(g.size(), 0.0);
  std::vector<double> orphan(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double pi = p.values()[i];
    const double qi = q.values()[i];
    if (pi <= density_floor) continue;
    if (qi <= density_floor) {
      orphan[i] = pi;
      continue;
    }
    integrand[i] = pi * std::log(pi / qi);
  }
  const double orphan_mass = trapezoid(g, orphan);
  if (orphan_mass > support_tol) {
    throw SupportMismatchError("relative_entropy: p has mass " +
                               std::to_string(orphan_mass) +
                               " where q is below the floor");
  }
  return trapezoid(g, integrand);
}

double pathwise_kl(const TrajectoryEnsemble& ens, const DriftHistory& beta,
                   const DriftHistory& b_plus_ref, const Density& rho_tilde_t1,
                   const Density& rho_t1, const PhysicalParams& params) {
  const double marginal = relative_entropy(rho_tilde_t1, rho_t1);
  const double inv_2s2 = 1.0 / (2.0 * params.sigma_sq());
  double acc = 0.0;
  const auto& times = ens.times();
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    double path_int = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      const double x = ens.position(p, k);
      const double d = b_plus_ref.b_plus(x, times[k]) - beta.b_plus(x, times[k]);
      path_int += d * d * std::abs(times[k + 1] - times[k]);
    }
    acc += path_int;
  }
  return marginal + inv_2s2 * acc / static_cast<double>(ens.n_paths());
}

double tv_distance(const Density& p, const Density& q) {
  if (p.grid() != q.grid()) throw ConfigError("tv_distance: grid mismatch");
  std::vector<double> diff(p.values().size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = std::abs(p.values()[i] - q.values()[i]);
  }
  return 0.5 * trapezoid(p.grid(), diff);
}

}  // namespace nsm
