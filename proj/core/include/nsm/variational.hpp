#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nsm/drift.hpp"
#include "nsm/sampler.hpp"
#include "nsm/schrodinger.hpp"

namespace nsm {

// Complex action and its kinetic/potential/boundary breakdown.
struct ActionReport {
  cplx value{0.0, 0.0};
  cplx kinetic{0.0, 0.0};
  cplx potential{0.0, 0.0};
  cplx boundary{0.0, 0.0};
  std::string scenario;
};

// Smooth test function with closed-form derivatives, used by the Lagrange
// functional. Time-independent bank; dphi_dt kept for generality.
struct TestFunction {
  std::string name;
  std::function<cplx(double)> phi;
  std::function<cplx(double)> grad;
  std::function<cplx(double)> lap;
  std::function<cplx(double)> dphi_dt = [](double) { return cplx(0.0, 0.0); };

  // {x, x^2, sin x, e^{ix}}
  static std::vector<TestFunction> bank();
};

// RMS residual of the complex Hamilton-Jacobi equation for
// S_q = (hbar/i) log psi, assembled branch-free from psi-ratios:
//   dS/dt + (1/2m) grad S . grad S + V - (i hbar/2m) lap S.
double hj_residual(const WavefunctionHistory& history, const ScalarPotential& V,
                   const PhysicalParams& params, double core_fraction = 0.05);

// Grid-time quadrature of E{ \int L(x, v_q) dt + S0(x(t0)) } using the Markov
// property, so the path expectation reduces to density-weighted quadrature.
ActionReport action_value(const WavefunctionHistory& history,
                          const ScalarPotential& V, const PhysicalParams& params,
                          const std::vector<cplx>& S0_boundary,
                          double core_fraction = 0.0);

struct LagrangeValue {
  cplx value{0.0, 0.0};
  double stderr_re = 0.0;
  double stderr_im = 0.0;

  double sigmas() const;  // |value| in units of its standard error
};

// Monte Carlo estimate of the Lagrange functional
//   Lambda^phi = E{ phi(x(T),T) - phi(x(0),0)
//                   + int [-dphi/dt - v_q . grad phi + (i hbar/2m) lap phi] dt }
// over a forward ensemble consistent with the drift field. The current-drift
// part is a pathwise Ito-style sum; the osmotic part enters the imaginary
// component as the expectation E[u grad phi + (sigma^2/2) lap phi].
LagrangeValue lagrange_functional_value(const TrajectoryEnsemble& ens,
                                        const DriftHistory& drifts,
                                        const TestFunction& phi_test,
                                        const PhysicalParams& params,
                                        bool check_consistency = true);

}  // namespace nsm
