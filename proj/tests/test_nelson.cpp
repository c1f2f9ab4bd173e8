#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "nsm/drift.hpp"
#include "nsm/errors.hpp"
#include "nsm/estimators.hpp"
#include "nsm/rng.hpp"
#include "nsm/sampler.hpp"
#include "nsm/schrodinger.hpp"

using namespace nsm;

namespace {

const PhysicalParams kUnit(1.0, 1.0);

Grid1D wide_grid() { return Grid1D(-8.0, 8.0, 801); }

// Stationary ground-state drift frames on [0, t_end]: u = -x, v = 0.
DriftHistory ground_state_drifts(const Grid1D& g, double t_end) {
  std::vector<DriftField> frames;
  for (double t : {0.0, t_end}) {
    std::vector<double> v(g.size(), 0.0), u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = -g.node(i);
    frames.emplace_back(g, t, v, u);
  }
  return DriftHistory(std::move(frames));
}

// Exact OU reference sampler: dx = -theta x dt + sigma dW via the exact
// transition kernel. Independent of the Euler-Maruyama code path.
double exact_ou_variance(double theta, double sigma_sq, double t_end, double dt,
                         std::size_t n_paths, std::uint64_t seed,
                         const Density& rho0) {
  const std::vector<double> x0 = sample_from_density(rho0, n_paths, seed);
  const double decay = std::exp(-theta * dt);
  const double noise_sd = std::sqrt(sigma_sq / (2.0 * theta) * (1.0 - decay * decay));
  const auto n_steps = static_cast<std::size_t>(std::llround(t_end / dt));
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    PathRng rng(seed + 17, p);
    double x = x0[p];
    for (std::size_t k = 0; k < n_steps; ++k) {
      x = decay * x + noise_sd * rng.next_normal();
    }
    s += x;
    s2 += x * x;
  }
  const auto n = static_cast<double>(n_paths);
  return s2 / n - (s / n) * (s / n);
}

}  // namespace

TEST_CASE("drift fields of the harmonic ground state") {
  // grad log psi0 = -x: u = -x, v = 0, b+ = -x, b- = +x, v_q = i x
  const Grid1D g = wide_grid();
  const Wavefunction psi = harmonic_ground_state(g, 1.0, 1.0, 1.0);
  const DriftField df = drift_fields(psi, kUnit);
  const double h = g.dx();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    if (std::abs(x) > 4.5) continue;  // clamped tail nodes
    // central-difference truncation of grad log psi0: |x| (x^2 + 3) h^2 / 6
    const double tol = h * h * std::abs(x) * (x * x + 3.0) / 3.0 + 1e-9;
    CHECK(std::abs(df.u()[i] + x) <= tol);
    CHECK(df.v()[i] == 0.0);
    CHECK(std::abs(df.b_plus()[i] + x) <= tol);
    CHECK(std::abs(df.b_minus()[i] - x) <= tol);
  }
  const auto vq = df.v_q();
  CHECK(vq[400].real() == df.v()[400]);
  CHECK(vq[400].imag() == -df.u()[400]);
}

TEST_CASE("drift field identities hold by construction") {
  const Grid1D g = wide_grid();
  const Wavefunction psi = gaussian_packet(g, 0.7, 0.4, 1.3);
  const DriftField df = drift_fields(psi, kUnit);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(df.b_plus()[i] - df.b_minus()[i] ==
          doctest::Approx(2.0 * df.u()[i]).epsilon(1e-14));
  }
}

TEST_CASE("real positive wavefunction has zero current drift") {
  const Grid1D g = wide_grid();
  std::vector<cplx> vals(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    vals[i] = std::exp(-0.3 * g.node(i) * g.node(i));
  }
  const DriftField df = drift_fields(normalize(Wavefunction(g, vals, 0.0)), kUnit);
  for (double v : df.v()) CHECK(v == 0.0);
}

TEST_CASE("global phase leaves the drift fields unchanged") {
  const Grid1D g = wide_grid();
  const Wavefunction psi = gaussian_packet(g, -0.5, 0.6, 0.8);
  std::vector<cplx> shifted(psi.values());
  const cplx phase = std::exp(cplx(0.0, 1.234));
  for (cplx& z : shifted) z *= phase;
  const DriftField a = drift_fields(psi, kUnit);
  const DriftField b = drift_fields(Wavefunction(g, shifted, 0.0), kUnit);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(a.u()[i] == doctest::Approx(b.u()[i]).epsilon(1e-12));
    CHECK(a.v()[i] == doctest::Approx(b.v()[i]).epsilon(1e-12));
  }
}

TEST_CASE("osmotic drift matches the density log-gradient") {
  // u = (sigma^2/2) grad log rho away from clamped nodes
  const Grid1D g = wide_grid();
  const Wavefunction psi = gaussian_packet(g, 0.0, 0.8);
  const DriftField df = drift_fields(psi, kUnit);
  const Density rho = born_density(psi);
  const auto grad_rho = gradient(g, rho.values());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (rho.values()[i] < 1e-4) continue;
    const double expect = 0.5 * kUnit.sigma_sq() * grad_rho[i] / rho.values()[i];
    // both routes are second-order discretizations of the same field
    CHECK(df.u()[i] == doctest::Approx(expect).epsilon(5e-3).scale(1.0));
  }
}

TEST_CASE("forward ground-state ensemble is stationary at variance one half") {
  const Grid1D g = wide_grid();
  const DriftHistory drifts = ground_state_drifts(g, 1.0);
  const Density rho0 = gaussian_density(g, 0.0, 0.5);

  SamplerConfig cfg;
  cfg.n_paths = 50000;
  cfg.dt = 0.01;
  cfg.seed = 2024;
  const TrajectoryEnsemble ens = sample_forward(rho0, drifts, kUnit, 0.0, 1.0, cfg);

  double s = 0.0, s2 = 0.0;
  const std::size_t last = ens.n_steps() - 1;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    const double x = ens.position(p, last);
    s += x;
    s2 += x * x;
  }
  const auto n = static_cast<double>(ens.n_paths());
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var == doctest::Approx(0.5).epsilon(0.02));

  // independent oracle: exact OU transition sampling, same target law
  const double ou_var = exact_ou_variance(1.0, 1.0, 1.0, 0.01, 50000, 99, rho0);
  CHECK(var == doctest::Approx(ou_var).epsilon(0.03));
}

TEST_CASE("tiny hbar freezes the paths") {
  const Grid1D g = wide_grid();
  std::vector<DriftField> frames;
  frames.emplace_back(g, 0.0, std::vector<double>(g.size(), 0.0),
                      std::vector<double>(g.size(), 0.0));
  const DriftHistory drifts(std::move(frames));
  const PhysicalParams tiny(1e-10, 1.0);
  const Density rho0 = gaussian_density(g, 0.0, 0.5);
  SamplerConfig cfg;
  cfg.n_paths = 200;
  cfg.dt = 0.01;
  cfg.seed = 5;
  const TrajectoryEnsemble ens = sample_forward(rho0, drifts, tiny, 0.0, 1.0, cfg);
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    CHECK(std::abs(ens.position(p, ens.n_steps() - 1) - ens.position(p, 0)) <
          1e-3);  // O(sqrt(hbar))
  }
}

TEST_CASE("fixed seed reproduces a path bit for bit") {
  const Grid1D g = wide_grid();
  const DriftHistory drifts = ground_state_drifts(g, 1.0);
  const Density rho0 = gaussian_density(g, 0.0, 0.5);
  SamplerConfig cfg;
  cfg.n_paths = 1;
  cfg.dt = 0.01;
  cfg.seed = 31337;
  const TrajectoryEnsemble a = sample_forward(rho0, drifts, kUnit, 0.0, 1.0, cfg);
  const TrajectoryEnsemble b = sample_forward(rho0, drifts, kUnit, 0.0, 1.0, cfg);
  for (std::size_t k = 0; k < a.n_steps(); ++k) {
    CHECK(a.position(0, k) == b.position(0, k));
  }
}

TEST_CASE("worker count does not change the sampled paths") {
  const Grid1D g = wide_grid();
  const DriftHistory drifts = ground_state_drifts(g, 0.2);
  const Density rho0 = gaussian_density(g, 0.0, 0.5);
  SamplerConfig cfg;
  cfg.n_paths = 4096;
  cfg.dt = 0.01;
  cfg.seed = 9;
  cfg.jobs = 1;
  const TrajectoryEnsemble a = sample_forward(rho0, drifts, kUnit, 0.0, 0.2, cfg);
  cfg.jobs = 4;
  const TrajectoryEnsemble b = sample_forward(rho0, drifts, kUnit, 0.0, 0.2, cfg);
  for (std::size_t p = 0; p < a.n_paths(); p += 111) {
    for (std::size_t k = 0; k < a.n_steps(); ++k) {
      CHECK(a.position(p, k) == b.position(p, k));
    }
  }
}

TEST_CASE("backward ground-state ensemble is stationary and matches forward") {
  const Grid1D g = wide_grid();
  const DriftHistory drifts = ground_state_drifts(g, 2.0);
  const Density rho = gaussian_density(g, 0.0, 0.5);

  SamplerConfig cfg;
  cfg.n_paths = 30000;
  cfg.dt = 0.01;
  cfg.seed = 77;
  const TrajectoryEnsemble bwd = sample_backward(rho, drifts, kUnit, 0.0, 2.0, cfg);
  CHECK(bwd.times().front() == 2.0);
  CHECK(bwd.times().back() == doctest::Approx(0.0));

  double s = 0.0, s2 = 0.0;
  const std::size_t last = bwd.n_steps() - 1;
  for (std::size_t p = 0; p < bwd.n_paths(); ++p) {
    const double x = bwd.position(p, last);
    s += x;
    s2 += x * x;
  }
  const auto n = static_cast<double>(bwd.n_paths());
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(0.5).epsilon(0.02));

  cfg.seed = 78;
  const TrajectoryEnsemble fwd = sample_forward(rho, drifts, kUnit, 0.0, 2.0, cfg);
  const Density df = empirical_density(fwd, 1.0, 64);
  const Density db = empirical_density(bwd, 1.0, 64);
  CHECK(tv_distance(df, db) <= 0.03);
}

TEST_CASE("sigma to zero backward path follows the current drift ODE") {
  // v(x) = -x/2, u = 0: backward path solves xdot = v
  const Grid1D g = wide_grid();
  std::vector<DriftField> frames;
  for (double t : {0.0, 1.0}) {
    std::vector<double> v(g.size()), u(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = -0.5 * g.node(i);
    frames.emplace_back(g, t, v, u);
  }
  const DriftHistory drifts(std::move(frames));
  const PhysicalParams tiny(1e-14, 1.0);
  // start all mass near x = 2 at t = 1
  const Density rho1 = gaussian_density(g, 2.0, 1e-4);
  SamplerConfig cfg;
  cfg.n_paths = 64;
  cfg.dt = 1e-3;
  cfg.seed = 3;
  const TrajectoryEnsemble ens = sample_backward(rho1, drifts, tiny, 0.0, 1.0, cfg);
  // ODE solution backward from x(1): x(0) = x(1) e^{+1/2}
  for (std::size_t p = 0; p < ens.n_paths(); p += 7) {
    const double x1 = ens.position(p, 0);
    const double x0 = ens.position(p, ens.n_steps() - 1);
    CHECK(x0 == doctest::Approx(x1 * std::exp(0.5)).epsilon(1e-2));
  }
}

TEST_CASE("recorded noise increments behave like Wiener increments") {
  const Grid1D g = wide_grid();
  const DriftHistory drifts = ground_state_drifts(g, 1.0);
  const Density rho0 = gaussian_density(g, 0.0, 0.5);
  SamplerConfig cfg;
  cfg.n_paths = 5000;
  cfg.dt = 0.01;
  cfg.seed = 11;
  cfg.record_noise = true;
  const TrajectoryEnsemble ens = sample_forward(rho0, drifts, kUnit, 0.0, 1.0, cfg);
  REQUIRE(ens.has_noise());
  double s = 0.0, s2 = 0.0;
  std::size_t cnt = 0;
  for (std::size_t p = 0; p < ens.n_paths(); ++p) {
    for (std::size_t k = 0; k + 1 < ens.n_steps(); ++k) {
      const double dw = ens.noise_increment(p, k);
      s += dw;
      s2 += dw * dw;
      ++cnt;
    }
  }
  const auto n = static_cast<double>(cnt);
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(cfg.dt / n));  // O(1/sqrt(N))
  CHECK(var == doctest::Approx(cfg.dt).epsilon(0.05));
}

TEST_CASE("runaway drift raises DriftBlowup") {
  const Grid1D g(-2.0, 2.0, 101);
  std::vector<double> v(g.size(), 0.0), u(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = 500.0;  // b+ = 500
  std::vector<DriftField> frames;
  frames.emplace_back(g, 0.0, v, u);
  const DriftHistory drifts(std::move(frames));
  const Density rho0 = gaussian_density(g, 0.0, 0.1);
  SamplerConfig cfg;
  cfg.n_paths = 100;
  cfg.dt = 0.01;
  cfg.seed = 1;
  CHECK_THROWS_AS(sample_forward(rho0, drifts, kUnit, 0.0, 1.0, cfg),
                  DriftBlowupError);
}

TEST_CASE("inverse-cdf sampling reproduces the density") {
  const Grid1D g(-6.0, 6.0, 601);
  const Density rho = gaussian_density(g, -1.0, 0.8);
  const auto xs = sample_from_density(rho, 100000, 4);
  double s = 0.0, s2 = 0.0;
  for (double x : xs) {
    s += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(xs.size());
  CHECK(s / n == doctest::Approx(-1.0).epsilon(0.01));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(0.8).epsilon(0.02));
}
