#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nsm/errors.hpp"

namespace nsm {

enum class Boundary { dirichlet, periodic };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

// Uniform 1-D grid with n nodes at x_min + i*dx, dx = (x_max-x_min)/(n-1).
// For periodic grids the node at x_max is identified with x_min + period;
// the stored nodes still span [x_min, x_max].
class Grid1D {
 public:
  Grid1D(double x_min, double x_max, std::size_t n,
         Boundary boundary = Boundary::dirichlet);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return n_; }
  double dx() const { return dx_; }
  Boundary boundary() const { return boundary_; }

  double node(std::size_t i) const { return x_min_ + static_cast<double>(i) * dx_; }
  std::vector<double> nodes() const;

  bool contains(double x) const { return x >= x_min_ && x <= x_max_; }

  // Index of the cell [node(i), node(i+1)] containing x, clamped to the grid.
  std::size_t cell_index(double x) const;

  bool operator==(const Grid1D& other) const {
    return x_min_ == other.x_min_ && x_max_ == other.x_max_ && n_ == other.n_ &&
           boundary_ == other.boundary_;
  }
  bool operator!=(const Grid1D& other) const { return !(*this == other); }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
  double dx_;
  Boundary boundary_;
};

}  // namespace nsm
