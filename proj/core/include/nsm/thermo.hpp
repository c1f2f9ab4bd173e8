#pragma once

#include <cstdint>
#include <vector>

#include "nsm/drift.hpp"
#include "nsm/measurement.hpp"
#include "nsm/potential.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

// Parameters of the thermodynamic reference diffusion.
struct ThermoParams {
  double kT = 1.0;
  double sigma_sq = 2.0;
  ScalarPotential H;

  ThermoParams(double kT_, double sigma_sq_, ScalarPotential H_);
};

// Time-indexed densities on a shared grid (the Fokker-Planck analogue of
// WavefunctionHistory).
class DensityHistory {
 public:
  DensityHistory(const Grid1D& g, std::vector<double> times,
                 std::vector<std::vector<double>> frames);

  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const std::vector<double>& frame_values(std::size_t k) const { return frames_[k]; }
  Density frame(std::size_t k) const { return Density(grid_, frames_[k], times_[k]); }
  std::size_t nearest_frame(double t) const;
  DensityHistory restricted(double t0, double t1) const;

 private:
  Grid1D grid_;
  std::vector<double> times_;
  std::vector<std::vector<double>> frames_;
};

// Maxwell-Boltzmann density C exp(-H/kT) on the grid.
Density equilibrium_density(const ThermoParams& tp);

// b+ = -(sigma^2 / 2kT) grad H.
DriftField forward_drift_from_H(const ThermoParams& tp);

struct FokkerPlanckConfig {
  std::size_t checkpoint_stride = 1;
  double theta = 0.5;  // 0.5 = Crank-Nicolson weighting, 1.0 = implicit Euler
};

// Conservative exponentially-fitted finite-volume solve of
//   d(rho)/dt + div(b+ rho) = (sigma^2/2) lap rho
// with no-flux boundaries. Discrete mass is conserved exactly and the
// discrete Maxwell-Boltzmann state is a fixed point. Throws
// StabilityViolationError when dt violates the positivity bound.
DensityHistory fokker_planck_propagate(const Density& rho0, const DriftField& b_plus,
                                       double sigma_sq, double t0, double t1,
                                       double dt, const FokkerPlanckConfig& cfg = {});

// b- = b+ - sigma^2 grad log rho on the support, clamped elsewhere.
DriftField backward_drift_field(const Density& rho, const DriftField& b_plus,
                                double sigma_sq, const DriftOptions& opt = {});

// Classical measurement update: posterior at t1, Fokker-Planck propagation
// with the unchanged forward drift, new backward drift, phi = -log(rho~/rho).
struct ClassicalMeasurementResult {
  Density rho_tilde_t1;
  DensityHistory rho_tilde_history;   // on [t1, t2]
  DensityHistory reference_history;   // restricted to [t1, t2]
  DriftField b_plus;                  // unchanged forward drift
  std::vector<double> phi_times;
  std::vector<std::vector<double>> phi;  // -log(rho~/rho), NaN off-support
  double floor_rel = 1e-12;
};

ClassicalMeasurementResult classical_measurement(
    const DensityHistory& reference, const DriftField& b_plus,
    const MeasurementEvent& ev, double sigma_sq, double t2, double dt,
    const FokkerPlanckConfig& cfg = {});

// Residual of  d(phi)/dt + b- grad phi - (sigma^2/2) lap phi
//            + (sigma^2/2) grad phi . grad phi  for phi = -log(rho~/rho),
// with b- the backward drift of the reference process.
ResidualReport thermo_pde_residual(const ClassicalMeasurementResult& result,
                                   double sigma_sq, double core_fraction = 0.05);

// Candidate drift b+ + eps * grad(phi_test) for the minimality check.
struct DriftCandidate {
  std::string label;
  double epsilon = 0.0;
  std::vector<double> grad_phi;  // grad(phi_test) sampled on the grid
};

struct KlCandidateResult {
  std::string label;
  double epsilon = 0.0;
  double kl = 0.0;
  double excess = 0.0;  // kl - kl(optimal)
};

struct KlMinimalityReport {
  double marginal_kl = 0.0;  // H(rho_tilde(t1), rho(t1))
  double optimal_kl = 0.0;   // pathwise KL of the beta = b+ candidate
  std::vector<KlCandidateResult> candidates;
};

// Samples an ensemble per candidate from rho_tilde(t1) and evaluates the
// Girsanov decomposition; the beta = b+ candidate attains the minimum.
KlMinimalityReport kl_minimality_check(const DensityHistory& reference,
                                       const DriftField& b_plus,
                                       const MeasurementEvent& ev,
                                       const std::vector<DriftCandidate>& candidates,
                                       double sigma_sq, double t2,
                                       std::size_t n_paths, double dt,
                                       std::uint64_t seed);

}  // namespace nsm
