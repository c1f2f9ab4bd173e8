#pragma once

#include <vector>

#include "nsm/params.hpp"
#include "nsm/schrodinger.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

struct DriftOptions {
  // Nodes with |psi|^2 below node_floor_rel * max|psi|^2 get their drifts
  // clamped to +-drift_cap.
  double node_floor_rel = 1e-10;
  double drift_cap = 1e3;
};

// Grid-sampled drift fields of the Nelson process at one time instant:
//   u  = (hbar/m) Re(grad psi / psi)   osmotic drift
//   v  = (hbar/m) Im(grad psi / psi)   current drift
//   b+ = v + u, b- = v - u, v_q = v - i u
class DriftField {
 public:
  DriftField(const Grid1D& g, double time, std::vector<double> v,
             std::vector<double> u);

  const Grid1D& grid() const { return grid_; }
  double time() const { return time_; }
  const std::vector<double>& v() const { return v_; }
  const std::vector<double>& u() const { return u_; }
  const std::vector<double>& b_plus() const { return b_plus_; }
  const std::vector<double>& b_minus() const { return b_minus_; }
  std::vector<cplx> v_q() const;

  static DriftField from_b_plus(const Grid1D& g, double time,
                                std::vector<double> b_plus);

 private:
  Grid1D grid_;
  double time_;
  std::vector<double> v_, u_, b_plus_, b_minus_;
};

// Drift fields extracted from a wavefunction. Clamping per DriftOptions
// keeps the fields defined across nodes of psi.
DriftField drift_fields(const Wavefunction& psi, const PhysicalParams& params,
                        const DriftOptions& opt = {});

// Time-indexed drift fields; evaluation is linear in space and linear
// between the two bracketing frames in time.
class DriftHistory {
 public:
  DriftHistory(std::vector<DriftField> frames);

  const Grid1D& grid() const { return frames_.front().grid(); }
  const std::vector<DriftField>& frames() const { return frames_; }
  double t_begin() const { return frames_.front().time(); }
  double t_end() const { return frames_.back().time(); }

  double b_plus(double x, double t) const;
  double b_minus(double x, double t) const;
  double v(double x, double t) const;
  double u(double x, double t) const;

  static DriftHistory from_history(const WavefunctionHistory& h,
                                   const PhysicalParams& params,
                                   const DriftOptions& opt = {});

 private:
  enum class Which { v, u, b_plus, b_minus };
  double eval(Which w, double x, double t) const;

  std::vector<DriftField> frames_;
};

}  // namespace nsm
