#pragma once

#include <vector>

#include "nsm/drift.hpp"
#include "nsm/sampler.hpp"
#include "nsm/schrodinger.hpp"

namespace nsm {

// Per-bin estimate of a conditional statistic over an ensemble slice.
struct BinnedField {
  std::vector<double> centers;
  std::vector<std::size_t> counts;
  std::vector<double> values;   // per-bin estimate (NaN on empty bins)
  std::vector<double> stderrs;  // per-bin standard error (NaN on empty bins)

  std::size_t total_count() const;
  bool occupied(std::size_t b) const { return counts[b] > 0; }
};

struct EstimatorOptions {
  std::size_t n_bins = 64;
  // Bins with rho_hat below this fraction of the peak are excluded from
  // drift regressions.
  double core_fraction = 0.05;
  // Floor inside all logarithms.
  double density_floor = 1e-12;
};

// Histogram of ensemble positions at time t, resampled onto the ensemble's
// grid by linear interpolation and normalized to unit mass.
Density empirical_density(const TrajectoryEnsemble& ens, double t,
                          std::size_t n_bins = 64);

// Per-bin mean of (x(t+dt) - x(t))/dt over paths with x(t) in the bin --
// the finite-dt conditional forward derivative.
BinnedField estimate_forward_drift(const TrajectoryEnsemble& ens, double t,
                                   std::size_t n_bins = 64);

// Per-bin mean of (x(t) - x(t-dt))/dt conditioned on x(t); also applicable
// to forward-sampled ensembles.
BinnedField estimate_backward_drift(const TrajectoryEnsemble& ens, double t,
                                    std::size_t n_bins = 64);

struct DualityReport {
  double slope = 0.0;      // regression of (b+ - b-) on sigma^2 grad log rho
  double intercept = 0.0;
  double rms = 0.0;        // weighted RMS of the pointwise residual
  std::size_t n_core_bins = 0;
  std::vector<double> centers, lhs, rhs;  // core-bin table
};

// Statistical check of the forward/backward drift duality at time t.
DualityReport duality_residual(const TrajectoryEnsemble& ens, double t,
                               const PhysicalParams& params,
                               const EstimatorOptions& opt = {});

// RMS over interior grid x time of  d(rho)/dt + div(v rho)  on the solver's
// own density and current velocity.
double continuity_residual(const WavefunctionHistory& history,
                           const PhysicalParams& params);

// Kullback-Leibler divergence integral p log(p/q) by quadrature.
double relative_entropy(const Density& p, const Density& q,
                        double density_floor = 1e-12,
                        double support_tol = 1e-6);

// Girsanov decomposition value for an ensemble sampled under drift beta:
//   H(rho_tilde, rho) + mean over paths of sum (1/2 sigma^2) |b+ - beta|^2 dt.
double pathwise_kl(const TrajectoryEnsemble& ens, const DriftHistory& beta,
                   const DriftHistory& b_plus_ref, const Density& rho_tilde_t1,
                   const Density& rho_t1, const PhysicalParams& params);

// Weighted least squares y ~ a + b x; returns {slope, intercept}.
std::pair<double, double> weighted_regression(const std::vector<double>& x,
                                              const std::vector<double>& y,
                                              const std::vector<double>& w);

// Total variation distance between two densities on a common grid,
// 0.5 * integral |p - q|.
double tv_distance(const Density& p, const Density& q);

}  // namespace nsm
