#include "nsm/schrodinger.hpp"

#include <algorithm>
#include <cmath>

#include "nsm/errors.hpp"

namespace nsm {

WavefunctionHistory::WavefunctionHistory(const Grid1D& g, std::vector<double> times,
                                         std::vector<std::vector<cplx>> frames)
    : grid_(g), times_(std::move(times)), frames_(std::move(frames)) {
  if (times_.empty() || times_.size() != frames_.size()) {
    throw ConfigError("WavefunctionHistory: times/frames mismatch");
  }
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (!(times_[k] < times_[k + 1])) {
      throw ConfigError("WavefunctionHistory: times must be strictly increasing");
    }
  }
  for (const auto& f : frames_) {
    if (f.size() != grid_.size()) {
      throw ConfigError("WavefunctionHistory: frame size does not match grid");
    }
  }
}

std::size_t WavefunctionHistory::nearest_frame(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0;
  if (it == times_.end()) return times_.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  return (t - times_[hi - 1] <= times_[hi] - t) ? hi - 1 : hi;
}

std::size_t WavefunctionHistory::bracket_frame(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = (it == times_.begin()) ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (k + 1 >= times_.size() && times_.size() >= 2) k = times_.size() - 2;
  return k;
}

WavefunctionHistory WavefunctionHistory::restricted(double t0, double t1) const {
  const double eps = 1e-12 * std::max(1.0, std::abs(t1));
  std::vector<double> ts;
  std::vector<std::vector<cplx>> fs;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (times_[k] >= t0 - eps && times_[k] <= t1 + eps) {
      ts.push_back(times_[k]);
      fs.push_back(frames_[k]);
    }
  }
  return WavefunctionHistory(grid_, std::move(ts), std::move(fs));
}

namespace {

// Thomas algorithm for a complex tridiagonal system with constant off-diagonals.
// Solves (d_i) x = r with sub/sup diagonal equal to `off`.
void solve_tridiag_const_off(const std::vector<cplx>& diag, cplx off,
                             std::vector<cplx>& rhs) {
  const std::size_t n = diag.size();
  std::vector<cplx> c(n, 0.0);
  cplx piv = diag[0];
  if (std::abs(piv) < 1e-300) throw LinearSolveFailure("tridiagonal pivot underflow");
  c[0] = off / piv;
  rhs[0] /= piv;
  for (std::size_t i = 1; i < n; ++i) {
    piv = diag[i] - off * c[i - 1];
    if (std::abs(piv) < 1e-300) throw LinearSolveFailure("tridiagonal pivot underflow");
    c[i] = off / piv;
    rhs[i] = (rhs[i] - off * rhs[i - 1]) / piv;
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] -= c[i] * rhs[i + 1];
  }
}

}  // namespace

Wavefunction step(const Wavefunction& psi, const ScalarPotential& V,
                  const PhysicalParams& params, double dt, const SolverConfig& cfg) {
  if (dt == 0.0) throw ConfigError("step: dt must be nonzero");
  if (std::abs(dt) > cfg.dt_max * (1.0 + 1e-12)) {
    throw ConfigError("step: |dt| exceeds dt_max");
  }
  const Grid1D& g = psi.grid();
  if (g.boundary() != Boundary::dirichlet) {
    throw ConfigError("step: Schrodinger solver requires dirichlet boundaries");
  }
  if (V.grid() != g) throw ConfigError("step: potential grid mismatch");

  const std::size_t n = g.size();
  const double h2 = g.dx() * g.dx();
  const cplx ic(0.0, 1.0);
  // A = (i hbar / 2m) D2 - (i/hbar) V; solve (I - dt/2 A) psi' = (I + dt/2 A) psi
  // on the interior, with psi = 0 pinned at both ends.
  const cplx alpha = ic * params.hbar() / (2.0 * params.mass()) / h2;  // off-diag of A
  const std::size_t m = n - 2;
  std::vector<cplx> diag(m), rhs(m);
  const cplx off = -0.5 * dt * alpha;
  const auto& u = psi.values();
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = j + 1;
    const cplx a_ii = -2.0 * alpha - ic * V(i) / params.hbar();
    diag[j] = 1.0 - 0.5 * dt * a_ii;
    const cplx b_ii = 1.0 + 0.5 * dt * a_ii;
    cplx r = b_ii * u[i];
    r += 0.5 * dt * alpha * (u[i - 1] + u[i + 1]);
    rhs[j] = r;
  }
  solve_tridiag_const_off(diag, off, rhs);

  std::vector<cplx> out(n, cplx(0.0, 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    if (!std::isfinite(rhs[j].real()) || !std::isfinite(rhs[j].imag())) {
      throw LinearSolveFailure("step: non-finite solution");
    }
    out[j + 1] = rhs[j];
  }
  return Wavefunction(g, std::move(out), psi.time() + dt);
}

WavefunctionHistory propagate(const Wavefunction& psi0, const ScalarPotential& V,
                              const PhysicalParams& params, double t0, double t1,
                              double dt, std::size_t checkpoint_stride,
                              const SolverConfig& cfg) {
  if (checkpoint_stride == 0) checkpoint_stride = 1;
  if (t1 != t0 && (t1 - t0) * dt <= 0.0) {
    throw ConfigError("propagate: sign of dt must match t1 - t0");
  }

  std::vector<double> times;
  std::vector<std::vector<cplx>> frames;
  Wavefunction psi = psi0.with_time(t0);
  times.push_back(t0);
  frames.push_back(psi.values());
  if (t1 == t0) return WavefunctionHistory(psi0.grid(), std::move(times), std::move(frames));

  const double span = t1 - t0;
  const auto n_steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
  const bool forward = t1 > t0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t_next = (k + 1 == n_steps) ? t1 : t0 + static_cast<double>(k + 1) * dt;
    const double step_dt = t_next - psi.time();
    psi = step(psi, V, params, step_dt, cfg);
    // pin checkpoint times to the nominal ladder so repeated runs agree exactly
    psi = psi.with_time(t_next);
    if ((k + 1) % checkpoint_stride == 0 || k + 1 == n_steps) {
      times.push_back(t_next);
      frames.push_back(psi.values());
    }
  }
  if (!forward) {
    std::reverse(times.begin(), times.end());
    std::reverse(frames.begin(), frames.end());
  }
  return WavefunctionHistory(psi0.grid(), std::move(times), std::move(frames));
}

double energy_expectation(const Wavefunction& psi, const ScalarPotential& V,
                          const PhysicalParams& params) {
  const Grid1D& g = psi.grid();
  const auto& u = psi.values();
  const std::vector<cplx> lap = laplacian(g, u);
  std::vector<double> integrand(g.size());
  const double kin = params.hbar() * params.hbar() / (2.0 * params.mass());
  for (std::size_t i = 0; i < g.size(); ++i) {
    integrand[i] = std::real(std::conj(u[i]) * (-kin * lap[i] + V(i) * u[i]));
  }
  return trapezoid(g, integrand);
}

}  // namespace nsm
