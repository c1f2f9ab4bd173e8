#include "nsm/grid.hpp"

#include <algorithm>
#include <cmath>

namespace nsm {

std::string to_string(Boundary b) {
  return b == Boundary::dirichlet ? "dirichlet" : "periodic";
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "dirichlet") return Boundary::dirichlet;
  if (s == "periodic") return Boundary::periodic;
  throw ConfigError("unknown boundary kind: " + s);
}

Grid1D::Grid1D(double x_min, double x_max, std::size_t n, Boundary boundary)
    : x_min_(x_min), x_max_(x_max), n_(n), boundary_(boundary) {
  if (!(x_min < x_max)) throw ConfigError("Grid1D: x_min must be < x_max");
  if (n < 8) throw ConfigError("Grid1D: need at least 8 nodes");
  if (!std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw ConfigError("Grid1D: bounds must be finite");
  }
  dx_ = (x_max - x_min) / static_cast<double>(n - 1);
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> xs(n_);
  for (std::size_t i = 0; i < n_; ++i) xs[i] = node(i);
  return xs;
}

std::size_t Grid1D::cell_index(double x) const {
  const double t = (x - x_min_) / dx_;
  const auto i = static_cast<long long>(std::floor(t));
  const long long max_cell = static_cast<long long>(n_) - 2;
  return static_cast<std::size_t>(std::clamp(i, 0LL, max_cell));
}

}  // namespace nsm
