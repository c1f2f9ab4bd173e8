#include "nsm/drift.hpp"

#include <algorithm>
#include <cmath>

#include "nsm/errors.hpp"
#include "nsm/field_ops.hpp"

namespace nsm {

DriftField::DriftField(const Grid1D& g, double time, std::vector<double> v,
                       std::vector<double> u)
    : grid_(g), time_(time), v_(std::move(v)), u_(std::move(u)) {
  if (v_.size() != g.size() || u_.size() != g.size()) {
    throw ConfigError("DriftField: field size does not match grid");
  }
  b_plus_.resize(g.size());
  b_minus_.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    b_plus_[i] = v_[i] + u_[i];
    b_minus_[i] = v_[i] - u_[i];
  }
}

std::vector<cplx> DriftField::v_q() const {
  std::vector<cplx> out(v_.size());
  for (std::size_t i = 0; i < v_.size(); ++i) out[i] = cplx(v_[i], -u_[i]);
  return out;
}

DriftField DriftField::from_b_plus(const Grid1D& g, double time,
                                   std::vector<double> b_plus) {
  // v = b+, u = 0: only the forward field is meaningful.
  return DriftField(g, time, std::move(b_plus), std::vector<double>(g.size(), 0.0));
}

DriftField drift_fields(const Wavefunction& psi, const PhysicalParams& params,
                        const DriftOptions& opt) {
  const Grid1D& g = psi.grid();
  const auto& w = psi.values();
  const std::vector<cplx> grad = gradient(g, w);
  const double scale = params.hbar() / params.mass();

  double max_abs2 = 0.0;
  for (const cplx& z : w) max_abs2 = std::max(max_abs2, std::norm(z));
  const double floor = opt.node_floor_rel * max_abs2;

  std::vector<double> v(g.size()), u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::norm(w[i]) <= floor) {
      v[i] = 0.0;
      u[i] = 0.0;
      continue;
    }
    const cplx log_grad = grad[i] / w[i];
    v[i] = std::clamp(scale * log_grad.imag(), -opt.drift_cap, opt.drift_cap);
    u[i] = std::clamp(scale * log_grad.real(), -opt.drift_cap, opt.drift_cap);
  }
  return DriftField(g, psi.time(), std::move(v), std::move(u));
}

DriftHistory::DriftHistory(std::vector<DriftField> frames)
    : frames_(std::move(frames)) {
  if (frames_.empty()) throw ConfigError("DriftHistory: no frames");
  for (std::size_t k = 0; k + 1 < frames_.size(); ++k) {
    if (!(frames_[k].time() < frames_[k + 1].time())) {
      throw ConfigError("DriftHistory: times must be strictly increasing");
    }
    if (frames_[k].grid() != frames_[k + 1].grid()) {
      throw ConfigError("DriftHistory: frames must share a grid");
    }
  }
}

double DriftHistory::eval(Which w, double x, double t) const {
  const auto field_of = [&](const DriftField& f) -> const std::vector<double>& {
    switch (w) {
      case Which::v: return f.v();
      case Which::u: return f.u();
      case Which::b_plus: return f.b_plus();
      default: return f.b_minus();
    }
  };
  if (frames_.size() == 1) {
    return interp_linear(grid(), field_of(frames_[0]), x);
  }
  // bracketing frames, then linear in time
  std::size_t lo = 0, hi = frames_.size() - 1;
  if (t <= frames_.front().time()) {
    hi = 1;
  } else if (t >= frames_.back().time()) {
    lo = frames_.size() - 2;
  } else {
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (frames_[mid].time() <= t) lo = mid; else hi = mid;
    }
  }
  const double t0 = frames_[lo].time(), t1 = frames_[hi].time();
  double a = (t - t0) / (t1 - t0);
  a = std::clamp(a, 0.0, 1.0);
  const double f0 = interp_linear(grid(), field_of(frames_[lo]), x);
  const double f1 = interp_linear(grid(), field_of(frames_[hi]), x);
  return (1.0 - a) * f0 + a * f1;
}

double DriftHistory::b_plus(double x, double t) const { return eval(Which::b_plus, x, t); }
double DriftHistory::b_minus(double x, double t) const { return eval(Which::b_minus, x, t); }
double DriftHistory::v(double x, double t) const { return eval(Which::v, x, t); }
double DriftHistory::u(double x, double t) const { return eval(Which::u, x, t); }

DriftHistory DriftHistory::from_history(const WavefunctionHistory& h,
                                        const PhysicalParams& params,
                                        const DriftOptions& opt) {
  std::vector<DriftField> frames;
  frames.reserve(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    frames.push_back(drift_fields(h.frame(k), params, opt));
  }
  return DriftHistory(std::move(frames));
}

}  // namespace nsm
