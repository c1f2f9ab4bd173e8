#include "nsm/potential.hpp"

#include <cmath>

namespace nsm {

ScalarPotential::ScalarPotential(Kind kind, const Grid1D& g,
                                 std::vector<double> values)
    : kind_(kind), grid_(g), values_(std::move(values)) {
  if (values_.size() != g.size()) {
    throw ConfigError("ScalarPotential: value count does not match grid");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ConfigError("ScalarPotential: non-finite value");
  }
}

ScalarPotential ScalarPotential::free_particle(const Grid1D& g) {
  return ScalarPotential(Kind::free, g, std::vector<double>(g.size(), 0.0));
}

ScalarPotential ScalarPotential::harmonic(const Grid1D& g, double omega,
                                          double mass) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    v[i] = 0.5 * mass * omega * omega * x * x;
  }
  return ScalarPotential(Kind::harmonic, g, std::move(v));
}

ScalarPotential ScalarPotential::double_well(const Grid1D& g, double a, double b) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    const double q = x * x - b * b;
    v[i] = a * q * q;
  }
  return ScalarPotential(Kind::double_well, g, std::move(v));
}

ScalarPotential ScalarPotential::tabulated(const Grid1D& g,
                                           std::vector<double> values) {
  return ScalarPotential(Kind::tabulated, g, std::move(values));
}

std::string ScalarPotential::kind_name() const {
  switch (kind_) {
    case Kind::free: return "free";
    case Kind::harmonic: return "harmonic";
    case Kind::double_well: return "double_well";
    case Kind::tabulated: return "tabulated";
  }
  return "unknown";
}

}  // namespace nsm
