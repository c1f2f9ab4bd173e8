#pragma once

#include <string>
#include <vector>

#include "nsm/grid.hpp"

namespace nsm {

// Grid-sampled scalar potential V(x).
class ScalarPotential {
 public:
  enum class Kind { free, harmonic, double_well, tabulated };

  static ScalarPotential free_particle(const Grid1D& g);
  static ScalarPotential harmonic(const Grid1D& g, double omega,
                                  double mass = 1.0);
  // V(x) = a (x^2 - b^2)^2
  static ScalarPotential double_well(const Grid1D& g, double a, double b);
  static ScalarPotential tabulated(const Grid1D& g, std::vector<double> values);

  Kind kind() const { return kind_; }
  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator()(std::size_t i) const { return values_[i]; }

  std::string kind_name() const;

 private:
  ScalarPotential(Kind kind, const Grid1D& g, std::vector<double> values);

  Kind kind_;
  Grid1D grid_;
  std::vector<double> values_;
};

}  // namespace nsm
