#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "nsm/drift.hpp"
#include "nsm/schrodinger.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

// Position measurement at time t1: either "x lies in D" (window kind, D a
// union of disjoint intervals) or an explicit posterior density.
struct MeasurementEvent {
  double time = 0.0;
  std::vector<std::pair<double, double>> windows;  // empty => posterior kind
  std::optional<Density> posterior;
  double min_mass = 1e-6;
  // Width of the inward C^2 ramp applied to the window indicator; 0 keeps
  // the sharp cut. The ramp is supported inside D, so the posterior mass
  // stays in D either way.
  double mollify_width = 0.0;

  bool is_window() const { return !windows.empty(); }

  static MeasurementEvent window(double t,
                                 std::vector<std::pair<double, double>> ivals,
                                 double mollify_width = 0.0);
  static MeasurementEvent from_posterior(double t, Density rho);
};

// Window indicator (possibly mollified) sampled on the grid.
std::vector<double> window_weight(const Grid1D& g, const MeasurementEvent& ev);

// Bayes update of the pre-measurement density.
Density bayes_posterior(const Density& rho, const MeasurementEvent& ev);

struct CollapseOptions {
  // Posterior nodes at or below this relative floor map to psi_tilde = 0.
  // Zeroing mass this far below the peak perturbs psi_tilde by under
  // 1e-15 of its scale, so the no-information measurement still keeps
  // psi_tilde = psi to solver tolerance on every carrying node.
  double rho_floor_rel = 1e-30;
  // |psi| below this relative floor cannot donate a phase.
  double psi_floor_rel = 1e-150;
  double core_fraction = 0.05;  // |psi|^2 core mask used by residuals
  // Nodes within this distance of a window cut are excluded from the
  // evaluated region: the sharp edge radiates grid-scale ripples whose
  // phase is not trackable across frames.
  double cut_margin = 0.25;
  std::size_t checkpoint_stride = 1;
};

// psi_tilde = sqrt(rho_tilde) * psi/|psi|: posterior modulus, unchanged phase.
Wavefunction collapse_wavefunction(const Wavefunction& psi, const Density& rho_tilde,
                                   const CollapseOptions& opt = {});

// Everything the post-measurement Nelson process is built from.
struct CollapseResult {
  Density rho_tilde_t1;
  WavefunctionHistory psi_tilde_history;   // on [t1, t2]
  WavefunctionHistory reference_history;   // reference restricted to [t1, t2]
  std::vector<double> phi_times;
  std::vector<std::vector<cplx>> phi;      // log(psi_tilde/psi), NaN off-support
  // Evaluated region for residuals and branch tracking: psi_tilde(t1) on
  // core and clear of every window cut.
  std::vector<char> core_mask;
  CollapseOptions options;
};

// phi = log(psi_tilde/psi) per frame, branch-continuous along time per node;
// NaN where either modulus is under its floor. Throws BranchAmbiguityError
// when the phase jump between frames exceeds pi/2 on the core region (or on
// the supplied mask when branch_mask is non-null).
std::vector<std::vector<cplx>> log_ratio_history(
    const WavefunctionHistory& tilde, const WavefunctionHistory& ref,
    const CollapseOptions& opt = {},
    const std::vector<char>* branch_mask = nullptr);

// Bayes posterior -> phase-preserving collapse -> Schrodinger propagation of
// psi_tilde on [t1, t2] with frames aligned to the reference history.
CollapseResult post_measurement_process(const WavefunctionHistory& reference,
                                        const MeasurementEvent& ev,
                                        const ScalarPotential& V,
                                        const PhysicalParams& params, double dt,
                                        double t2, const CollapseOptions& opt = {});

// Quadrature of |psi_tilde(., t)|^2 over D (defaults to the collapse time).
double repetition_probability(const CollapseResult& result,
                              const std::vector<std::pair<double, double>>& D,
                              std::optional<double> at_time = std::nullopt);

struct ResidualReport {
  double rms = 0.0;          // RMS of the PDE residual over the core region
  double ic_max_dev = 0.0;   // max | phi(t1) - initial condition |
  std::size_t n_points = 0;  // core points entering the RMS
};

// Residual of  d(phi)/dt + v_q grad phi - (i hbar/2m) lap phi
//            - (i hbar/2m) grad phi . grad phi
// for phi = log(psi_tilde/psi), plus the deviation of phi(t1) from
// (1/2) log(rho_tilde/rho).
ResidualReport collapse_pde_residual(const CollapseResult& result,
                                     const PhysicalParams& params);

}  // namespace nsm
