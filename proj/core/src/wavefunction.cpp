#include "nsm/wavefunction.hpp"

#include <cmath>

#include "nsm/errors.hpp"

namespace nsm {

Wavefunction::Wavefunction(const Grid1D& g, std::vector<cplx> values, double time)
    : grid_(g), values_(std::move(values)), time_(time) {
  if (values_.size() != g.size()) {
    throw ConfigError("Wavefunction: value count does not match grid");
  }
}

double Wavefunction::norm() const {
  std::vector<double> a(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) a[i] = std::norm(values_[i]);
  return std::sqrt(trapezoid(grid_, a));
}

double Wavefunction::max_abs() const {
  double m = 0.0;
  for (const cplx& v : values_) m = std::max(m, std::abs(v));
  return m;
}

Density::Density(const Grid1D& g, std::vector<double> values, double time)
    : grid_(g), values_(std::move(values)), time_(time) {
  if (values_.size() != g.size()) {
    throw ConfigError("Density: value count does not match grid");
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("Density: values must be finite and >= 0");
    }
  }
}

double Density::total_mass() const { return trapezoid(grid_, values_); }

Density Density::normalized() const {
  const double z = total_mass();
  if (z < 1e-300) throw ZeroNormError("Density: zero mass");
  std::vector<double> v(values_);
  for (double& x : v) x /= z;
  return Density(grid_, std::move(v), time_);
}

double Density::mean() const {
  std::vector<double> xf(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) xf[i] = grid_.node(i) * values_[i];
  return trapezoid(grid_, xf) / total_mass();
}

double Density::variance() const {
  const double mu = mean();
  std::vector<double> x2f(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double d = grid_.node(i) - mu;
    x2f[i] = d * d * values_[i];
  }
  return trapezoid(grid_, x2f) / total_mass();
}

Wavefunction normalize(const Wavefunction& psi) {
  const double n = psi.norm();
  if (n < 1e-300) throw ZeroNormError("normalize: wavefunction has zero norm");
  std::vector<cplx> v(psi.values());
  for (cplx& z : v) z /= n;
  return Wavefunction(psi.grid(), std::move(v), psi.time());
}

Density born_density(const Wavefunction& psi) {
  std::vector<double> rho(psi.values().size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(psi.values()[i]);
  return Density(psi.grid(), std::move(rho), psi.time());
}

Wavefunction gaussian_packet(const Grid1D& g, double x0, double s0_sq,
                             double k0, double time) {
  std::vector<cplx> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    const double d = x - x0;
    v[i] = std::exp(cplx(-d * d / (4.0 * s0_sq), k0 * x));
  }
  return normalize(Wavefunction(g, std::move(v), time));
}

Wavefunction harmonic_ground_state(const Grid1D& g, double hbar, double mass,
                                   double omega, double time) {
  const double a = mass * omega / hbar;
  std::vector<cplx> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    v[i] = std::pow(a / M_PI, 0.25) * std::exp(-0.5 * a * x * x);
  }
  return normalize(Wavefunction(g, std::move(v), time));
}

Density gaussian_density(const Grid1D& g, double mu, double var, double time) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = g.node(i) - mu;
    v[i] = std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
  }
  return Density(g, std::move(v), time).normalized();
}

}  // namespace nsm
