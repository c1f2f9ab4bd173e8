#include "nsm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "nsm/errors.hpp"
#include "nsm/rng.hpp"

namespace nsm {

std::string to_string(Direction d) {
  return d == Direction::forward ? "forward" : "backward";
}

TrajectoryEnsemble::TrajectoryEnsemble(Grid1D grid, Direction direction,
                                       std::vector<double> times,
                                       std::size_t n_paths,
                                       std::vector<double> positions,
                                       std::vector<double> noise,
                                       std::uint64_t seed, double dt,
                                       std::size_t n_flagged)
    : grid_(grid),
      direction_(direction),
      times_(std::move(times)),
      n_paths_(n_paths),
      positions_(std::move(positions)),
      noise_(std::move(noise)),
      seed_(seed),
      dt_(dt),
      n_flagged_(n_flagged) {
  if (times_.size() < 1 || n_paths_ < 1) {
    throw EmptyEnsembleError("TrajectoryEnsemble: empty");
  }
  if (positions_.size() != n_paths_ * times_.size()) {
    throw ConfigError("TrajectoryEnsemble: position buffer size mismatch");
  }
  const bool increasing = direction_ == Direction::forward;
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    if (increasing ? !(times_[k] < times_[k + 1]) : !(times_[k] > times_[k + 1])) {
      throw ConfigError("TrajectoryEnsemble: times not monotone in integration order");
    }
  }
}

std::size_t TrajectoryEnsemble::time_index(double t, double tol) const {
  std::size_t best = 0;
  double best_d = std::abs(times_[0] - t);
  for (std::size_t k = 1; k < times_.size(); ++k) {
    const double d = std::abs(times_[k] - t);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (best_d > tol) {
    throw InsufficientDataError("time " + std::to_string(t) + " not stored in ensemble");
  }
  return best;
}

TrajectoryEnsemble TrajectoryEnsemble::at_times(
    const std::vector<std::size_t>& keep) const {
  std::vector<double> ts(keep.size());
  std::vector<double> pos(n_paths_ * keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) ts[j] = times_[keep[j]];
  for (std::size_t p = 0; p < n_paths_; ++p) {
    for (std::size_t j = 0; j < keep.size(); ++j) {
      pos[p * keep.size() + j] = position(p, keep[j]);
    }
  }
  return TrajectoryEnsemble(grid_, direction_, std::move(ts), n_paths_,
                            std::move(pos), {}, seed_, dt_, n_flagged_);
}

std::vector<double> sample_from_density(const Density& rho, std::size_t n,
                                        std::uint64_t seed) {
  const Grid1D& g = rho.grid();
  const auto& f = rho.values();
  const double dx = g.dx();
  // cumulative trapezoid masses per cell
  std::vector<double> cdf(g.size(), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (f[i - 1] + f[i]) * dx;
  }
  const double total = cdf.back();
  if (total < 1e-300) throw ZeroNormError("sample_from_density: zero mass");

  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    PathRng rng(seed, j);
    const double u = rng.next_uniform() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = (it == cdf.begin()) ? 0
                                        : static_cast<std::size_t>(it - cdf.begin()) - 1;
    i = std::min(i, g.size() - 2);
    const double du = u - cdf[i];
    const double f0 = f[i], f1 = f[i + 1];
    const double s = f1 - f0;
    // invert  dx * (f0 t + s t^2 / 2) = du  on the cell
    double t;
    if (std::abs(s) < 1e-14 * std::max(f0, 1e-300)) {
      t = f0 > 0.0 ? du / (dx * f0) : 0.5;
    } else {
      const double disc = f0 * f0 + 2.0 * s * du / dx;
      t = (std::sqrt(std::max(disc, 0.0)) - f0) / s;
    }
    t = std::clamp(t, 0.0, 1.0);
    out[j] = g.node(i) + t * dx;
  }
  return out;
}

namespace {

TrajectoryEnsemble run_sampler(const Density& rho_init, const DriftHistory& drifts,
                               const PhysicalParams& params, double t_start,
                               double t_end, const SamplerConfig& cfg,
                               Direction dir) {
  if (cfg.n_paths < 1) throw ConfigError("sampler: n_paths must be >= 1");
  if (!(cfg.dt > 0.0)) throw ConfigError("sampler: dt must be > 0");
  if (!(t_end > t_start)) throw ConfigError("sampler: need t_end > t_start");

  const Grid1D& g = rho_init.grid();
  const double span = t_end - t_start;
  const auto n_steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-9));
  const std::size_t n_times = n_steps + 1;

  // time ladder in integration order
  std::vector<double> times(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    const double offs = std::min(static_cast<double>(k) * cfg.dt, span);
    times[k] = dir == Direction::forward ? t_start + offs : t_end - offs;
  }
  times[n_steps] = dir == Direction::forward ? t_end : t_start;

  const std::vector<double> x0 = sample_from_density(rho_init, cfg.n_paths, cfg.seed);
  const double sigma = params.sigma();

  std::vector<double> pos(cfg.n_paths * n_times);
  std::vector<double> noise;
  if (cfg.record_noise) noise.resize(cfg.n_paths * n_steps);
  std::atomic<std::size_t> flagged{0};

  const double lo = g.x_min(), hi = g.x_max(), dx = g.dx();
  auto simulate_range = [&](std::size_t p_begin, std::size_t p_end) {
    std::size_t local_flagged = 0;
    for (std::size_t p = p_begin; p < p_end; ++p) {
      // offset the stream so initial draws and path noise never overlap
      PathRng rng(cfg.seed ^ 0x5bf0f3c5ULL, p);
      double x = x0[p];
      bool path_flagged = false;
      pos[p * n_times] = x;
      for (std::size_t k = 0; k < n_steps; ++k) {
        const double step_dt = std::abs(times[k + 1] - times[k]);
        const double b = dir == Direction::forward ? drifts.b_plus(x, times[k])
                                                   : drifts.b_minus(x, times[k]);
        const double dw = sigma > 0.0 ? std::sqrt(step_dt) * rng.next_normal() : 0.0;
        const double drift_term = dir == Direction::forward ? b * step_dt : -b * step_dt;
        x += drift_term + sigma * dw;
        if (x < lo - dx || x > hi + dx) {
          x = std::clamp(x < lo ? 2.0 * lo - x : 2.0 * hi - x, lo, hi);
          path_flagged = true;
        }
        if (cfg.record_noise) noise[p * n_steps + k] = dw;
        pos[p * n_times + k + 1] = x;
      }
      if (path_flagged) ++local_flagged;
    }
    flagged += local_flagged;
  };

  unsigned jobs = cfg.jobs ? cfg.jobs : std::thread::hardware_concurrency();
  jobs = std::max(1u, std::min<unsigned>(jobs, 64));
  if (jobs == 1 || cfg.n_paths < 1024) {
    simulate_range(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.n_paths + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(cfg.n_paths, b + chunk);
      if (b >= e) break;
      pool.emplace_back(simulate_range, b, e);
    }
    for (auto& th : pool) th.join();
  }

  const double frac =
      static_cast<double>(flagged.load()) / static_cast<double>(cfg.n_paths);
  if (frac > cfg.max_flagged_fraction) {
    throw DriftBlowupError("sampler: " + std::to_string(flagged.load()) +
                           " of " + std::to_string(cfg.n_paths) +
                           " paths left the grid");
  }
  return TrajectoryEnsemble(g, dir, std::move(times), cfg.n_paths, std::move(pos),
                            std::move(noise), cfg.seed, cfg.dt, flagged.load());
}

}  // namespace

TrajectoryEnsemble sample_forward(const Density& rho0, const DriftHistory& drifts,
                                  const PhysicalParams& params, double t_start,
                                  double t_end, const SamplerConfig& cfg) {
  return run_sampler(rho0, drifts, params, t_start, t_end, cfg, Direction::forward);
}

TrajectoryEnsemble sample_backward(const Density& rho1, const DriftHistory& drifts,
                                   const PhysicalParams& params, double t_start,
                                   double t_end, const SamplerConfig& cfg) {
  return run_sampler(rho1, drifts, params, t_start, t_end, cfg, Direction::backward);
}

}  // namespace nsm
