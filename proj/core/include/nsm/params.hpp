#pragma once

#include <cmath>

#include "nsm/errors.hpp"

namespace nsm {

// Physical constants in natural units. The diffusion coefficient of the
// position process is sigma^2 = hbar/m, so sigma_sq is derived and never
// set independently.
class PhysicalParams {
 public:
  PhysicalParams() : PhysicalParams(1.0, 1.0) {}

  PhysicalParams(double hbar, double mass) : hbar_(hbar), mass_(mass) {
    if (!(hbar > 0.0) || !(mass > 0.0)) {
      throw ConfigError("PhysicalParams: hbar and mass must be > 0");
    }
  }

  double hbar() const { return hbar_; }
  double mass() const { return mass_; }
  double sigma_sq() const { return hbar_ / mass_; }
  double sigma() const { return std::sqrt(hbar_ / mass_); }

 private:
  double hbar_;
  double mass_;
};

}  // namespace nsm
