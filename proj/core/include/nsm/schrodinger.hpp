#pragma once

#include <vector>

#include "nsm/params.hpp"
#include "nsm/potential.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

// Time-indexed wavefunction frames on a shared grid, times strictly increasing.
class WavefunctionHistory {
 public:
  WavefunctionHistory(const Grid1D& g, std::vector<double> times,
                      std::vector<std::vector<cplx>> frames);

  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

  const std::vector<cplx>& frame_values(std::size_t k) const { return frames_[k]; }
  Wavefunction frame(std::size_t k) const {
    return Wavefunction(grid_, frames_[k], times_[k]);
  }

  // Index of the stored frame closest to t.
  std::size_t nearest_frame(double t) const;
  // Largest k with times[k] <= t (clamped so k+1 is valid).
  std::size_t bracket_frame(double t) const;

  // New history containing the frames with t0 - eps <= t <= t1 + eps.
  WavefunctionHistory restricted(double t0, double t1) const;

 private:
  Grid1D grid_;
  std::vector<double> times_;
  std::vector<std::vector<cplx>> frames_;
};

struct SolverConfig {
  double dt_max = 1e-2;
};

// One Crank-Nicolson step of  d(psi)/dt = (i hbar / 2m) Lap psi - (i/hbar) V psi
// with dirichlet boundaries. Unitary up to roundoff for time-independent V.
Wavefunction step(const Wavefunction& psi, const ScalarPotential& V,
                  const PhysicalParams& params, double dt,
                  const SolverConfig& cfg = {});

// Repeated CN stepping from t0 to t1, storing every checkpoint_stride-th frame
// (the initial and final frames are always stored). The last step is shortened
// when t1 - t0 is not a multiple of dt.
WavefunctionHistory propagate(const Wavefunction& psi0, const ScalarPotential& V,
                              const PhysicalParams& params, double t0, double t1,
                              double dt, std::size_t checkpoint_stride = 1,
                              const SolverConfig& cfg = {});

// <psi|H|psi> with the solver's discrete Hamiltonian (trapezoid weights).
double energy_expectation(const Wavefunction& psi, const ScalarPotential& V,
                          const PhysicalParams& params);

}  // namespace nsm
