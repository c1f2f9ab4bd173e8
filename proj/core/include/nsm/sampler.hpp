#pragma once

#include <cstdint>
#include <vector>

#include "nsm/drift.hpp"
#include "nsm/wavefunction.hpp"

namespace nsm {

enum class Direction { forward, backward };

std::string to_string(Direction d);

struct SamplerConfig {
  std::size_t n_paths = 1;
  double dt = 1e-2;
  std::uint64_t seed = 0;
  bool record_noise = false;
  unsigned jobs = 0;  // 0 = hardware concurrency
  // A path that leaves the grid by more than one cell is reflected and
  // flagged; more than this fraction of flagged paths aborts the run.
  double max_flagged_fraction = 0.01;
};

// Sampled diffusion paths. Positions are stored at every integrator time,
// path-major; times run in integration order (decreasing for backward
// ensembles). Noise increments are the sampled Wiener increments w+ or w-.
class TrajectoryEnsemble {
 public:
  TrajectoryEnsemble(Grid1D grid, Direction direction, std::vector<double> times,
                     std::size_t n_paths, std::vector<double> positions,
                     std::vector<double> noise, std::uint64_t seed, double dt,
                     std::size_t n_flagged);

  const Grid1D& grid() const { return grid_; }
  Direction direction() const { return direction_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t n_steps() const { return times_.size(); }
  std::size_t n_paths() const { return n_paths_; }
  std::uint64_t seed() const { return seed_; }
  double dt() const { return dt_; }
  std::size_t n_flagged() const { return n_flagged_; }
  bool has_noise() const { return !noise_.empty(); }

  double position(std::size_t path, std::size_t k) const {
    return positions_[path * times_.size() + k];
  }
  // Wiener increment taking the path from times[k] to times[k+1].
  double noise_increment(std::size_t path, std::size_t k) const {
    return noise_[path * (times_.size() - 1) + k];
  }

  // Index of the stored time closest to t; throws when farther than tol.
  std::size_t time_index(double t, double tol = 1e-9) const;

  // Ensemble restricted to a subset of stored time indices (for export).
  TrajectoryEnsemble at_times(const std::vector<std::size_t>& keep) const;

 private:
  Grid1D grid_;
  Direction direction_;
  std::vector<double> times_;
  std::size_t n_paths_;
  std::vector<double> positions_;
  std::vector<double> noise_;
  std::uint64_t seed_;
  double dt_;
  std::size_t n_flagged_;
};

// Draw n i.i.d. samples from a piecewise-linear density by inverse CDF.
// Sample j uses PathRng(seed, j), so the draw is reproducible per index.
std::vector<double> sample_from_density(const Density& rho, std::size_t n,
                                        std::uint64_t seed);

// Forward Euler-Maruyama over [t_start, t_end]:
//   x(t+dt) = x(t) + b+(x(t),t) dt + sigma dW,   sigma^2 = hbar/m,
// with initial positions i.i.d. from rho0.
TrajectoryEnsemble sample_forward(const Density& rho0, const DriftHistory& drifts,
                                  const PhysicalParams& params, double t_start,
                                  double t_end, const SamplerConfig& cfg);

// Reverse-time mirror starting from rho1 at t_end:
//   x(t-dt) = x(t) - b-(x(t),t) dt + sigma dW.
TrajectoryEnsemble sample_backward(const Density& rho1, const DriftHistory& drifts,
                                   const PhysicalParams& params, double t_start,
                                   double t_end, const SamplerConfig& cfg);

}  // namespace nsm
