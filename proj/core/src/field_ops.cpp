#include "nsm/field_ops.hpp"

#include <cstddef>

namespace nsm {

namespace {

template <typename T>
std::vector<T> gradient_impl(const Grid1D& g, const std::vector<T>& f) {
  const std::size_t n = g.size();
  if (f.size() != n) throw ConfigError("gradient: field size does not match grid");
  std::vector<T> out(n);
  const double h = g.dx();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  }
  if (g.boundary() == Boundary::periodic) {
    out[0] = (f[1] - f[n - 1]) / (2.0 * h);
    out[n - 1] = (f[0] - f[n - 2]) / (2.0 * h);
  } else {
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  }
  return out;
}

template <typename T>
std::vector<T> laplacian_impl(const Grid1D& g, const std::vector<T>& f) {
  const std::size_t n = g.size();
  if (f.size() != n) throw ConfigError("laplacian: field size does not match grid");
  std::vector<T> out(n);
  const double h2 = g.dx() * g.dx();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
  }
  if (g.boundary() == Boundary::periodic) {
    out[0] = (f[1] - 2.0 * f[0] + f[n - 1]) / h2;
    out[n - 1] = (f[0] - 2.0 * f[n - 1] + f[n - 2]) / h2;
  } else {
    // one-sided 4-point, second order
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
  }
  return out;
}

template <typename T>
T trapezoid_impl(const Grid1D& g, const std::vector<T>& f) {
  const std::size_t n = g.size();
  if (f.size() != n) throw ConfigError("trapezoid: field size does not match grid");
  T acc = 0.5 * (f[0] + f[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) acc += f[i];
  return acc * g.dx();
}

}  // namespace

std::vector<double> gradient(const Grid1D& g, const std::vector<double>& f) {
  return gradient_impl(g, f);
}
std::vector<cplx> gradient(const Grid1D& g, const std::vector<cplx>& f) {
  return gradient_impl(g, f);
}

std::vector<double> laplacian(const Grid1D& g, const std::vector<double>& f) {
  return laplacian_impl(g, f);
}
std::vector<cplx> laplacian(const Grid1D& g, const std::vector<cplx>& f) {
  return laplacian_impl(g, f);
}

double trapezoid(const Grid1D& g, const std::vector<double>& f) {
  return trapezoid_impl(g, f);
}
cplx trapezoid(const Grid1D& g, const std::vector<cplx>& f) {
  return trapezoid_impl(g, f);
}

double interp_linear(const Grid1D& g, const std::vector<double>& f, double x) {
  const std::size_t i = g.cell_index(x);
  const double t = (x - g.node(i)) / g.dx();
  const double tc = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return f[i] * (1.0 - tc) + f[i + 1] * tc;
}

}  // namespace nsm
