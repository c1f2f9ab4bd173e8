#pragma once

#include <complex>
#include <vector>

#include "nsm/grid.hpp"

namespace nsm {

using cplx = std::complex<double>;

// Discrete calculus on grid-sampled fields. All stencils are second-order:
// central differences in the interior, one-sided 3-point at dirichlet
// boundaries, wrap-around at periodic ones. The periodic wrap treats
// node(0) and node(n-1) as one period apart (spacing dx across the seam).

std::vector<double> gradient(const Grid1D& g, const std::vector<double>& f);
std::vector<cplx> gradient(const Grid1D& g, const std::vector<cplx>& f);

std::vector<double> laplacian(const Grid1D& g, const std::vector<double>& f);
std::vector<cplx> laplacian(const Grid1D& g, const std::vector<cplx>& f);

// Trapezoid quadrature of f over the grid.
double trapezoid(const Grid1D& g, const std::vector<double>& f);
cplx trapezoid(const Grid1D& g, const std::vector<cplx>& f);

// Linear interpolation of a grid-sampled field at x (clamped to the grid).
double interp_linear(const Grid1D& g, const std::vector<double>& f, double x);

}  // namespace nsm
