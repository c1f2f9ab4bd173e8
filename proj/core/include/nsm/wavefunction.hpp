#pragma once

#include <complex>
#include <vector>

#include "nsm/field_ops.hpp"
#include "nsm/grid.hpp"

namespace nsm {

// Complex amplitude field on a grid at one time instant.
class Wavefunction {
 public:
  Wavefunction(const Grid1D& g, std::vector<cplx> values, double time);

  const Grid1D& grid() const { return grid_; }
  const std::vector<cplx>& values() const { return values_; }
  double time() const { return time_; }

  // L2 norm via trapezoid quadrature of |psi|^2.
  double norm() const;
  double max_abs() const;

  Wavefunction with_time(double t) const { return Wavefunction(grid_, values_, t); }

 private:
  Grid1D grid_;
  std::vector<cplx> values_;
  double time_;
};

// Probability density on a grid at one time instant. Nonnegative values;
// construction verifies the quadrature is finite but does not force it to 1
// (use normalized() for that).
class Density {
 public:
  Density(const Grid1D& g, std::vector<double> values, double time);

  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double time() const { return time_; }

  double total_mass() const;
  Density normalized() const;
  Density with_time(double t) const { return Density(grid_, values_, t); }

  double mean() const;
  double variance() const;

 private:
  Grid1D grid_;
  std::vector<double> values_;
  double time_;
};

// Rescale psi to unit L2 norm. Throws ZeroNormError when the norm is
// numerically zero.
Wavefunction normalize(const Wavefunction& psi);

// Born's relation rho = |psi|^2. Expects a normalized input.
Density born_density(const Wavefunction& psi);

// Gaussian packet psi ~ exp(-(x-x0)^2/(4 s0^2) + i k0 x), normalized on the grid.
Wavefunction gaussian_packet(const Grid1D& g, double x0, double s0_sq,
                             double k0 = 0.0, double time = 0.0);

// Ground state of the harmonic oscillator, (m w / pi hbar)^{1/4} exp(-m w x^2 / 2 hbar).
Wavefunction harmonic_ground_state(const Grid1D& g, double hbar, double mass,
                                   double omega, double time = 0.0);

// Gaussian density N(mu, var) sampled on the grid and trapezoid-normalized.
Density gaussian_density(const Grid1D& g, double mu, double var, double time = 0.0);

}  // namespace nsm
