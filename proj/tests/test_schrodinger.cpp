#include <doctest.h>

#include <cmath>
#include <complex>

#include "nsm/errors.hpp"
#include "nsm/schrodinger.hpp"

using namespace nsm;

namespace {
const PhysicalParams kUnit(1.0, 1.0);

Grid1D ground_grid() { return Grid1D(-8.0, 8.0, 5335); }
}  // namespace

TEST_CASE("CN step keeps the stationary state modulus and rotates the phase") {
  const Grid1D g = ground_grid();
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = harmonic_ground_state(g, 1.0, 1.0, 1.0);
  const double dt = 1e-3;
  const Wavefunction psi1 = step(psi0, V, kUnit, dt);

  double max_mod_dev = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    max_mod_dev = std::max(max_mod_dev, std::abs(std::abs(psi1.values()[i]) -
                                                 std::abs(psi0.values()[i])));
  }
  CHECK(max_mod_dev < 1e-8);

  // global phase factor e^{-i E0 dt}, E0 = hbar omega / 2 = 1/2
  const std::size_t c = g.size() / 2;
  const cplx ratio = psi1.values()[c] / psi0.values()[c];
  CHECK(std::arg(ratio) == doctest::Approx(-0.5 * dt).epsilon(1e-6));
  CHECK(std::abs(ratio) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("free step with dt -> 0 approaches the identity") {
  const Grid1D g(-10.0, 10.0, 501);
  const auto V = ScalarPotential::free_particle(g);
  const Wavefunction psi0 = gaussian_packet(g, 0.0, 0.5);
  double prev_dev = 0.0;
  for (double dt : {1e-3, 1e-4, 1e-5}) {
    const Wavefunction psi1 = step(psi0, V, kUnit, dt);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dev = std::max(dev, std::abs(psi1.values()[i] - psi0.values()[i]));
    }
    if (prev_dev > 0.0) CHECK(dev < 0.2 * prev_dev);  // O(dt)
    prev_dev = dev;
  }
}

TEST_CASE("free gaussian spreading follows the closed-form variance") {
  // s0^2 = 1/2, hbar = m = 1: Var(t) = (1 + t^2)/2
  const Grid1D g(-12.0, 12.0, 1201);  // dx = 0.02
  const auto V = ScalarPotential::free_particle(g);
  const Wavefunction psi0 = gaussian_packet(g, 0.0, 0.5);
  const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 1.0, 1e-3, 100);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double t = h.times()[k];
    const double var = born_density(normalize(h.frame(k))).variance();
    CHECK(var == doctest::Approx(0.5 * (1.0 + t * t)).epsilon(1e-3));
  }
}

TEST_CASE("propagate backward with -dt recovers the initial state") {
  const Grid1D g(-10.0, 10.0, 801);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = gaussian_packet(g, 1.0, 0.5);
  const WavefunctionHistory fwd = propagate(psi0, V, kUnit, 0.0, 0.5, 1e-3, 500);
  const Wavefunction end = fwd.frame(fwd.size() - 1);
  const WavefunctionHistory bwd = propagate(end, V, kUnit, 0.5, 0.0, -1e-3, 500);
  const Wavefunction back = bwd.frame(0);
  CHECK(bwd.times().front() == doctest::Approx(0.0));
  double dev = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dev = std::max(dev, std::abs(back.values()[i] - psi0.values()[i]));
  }
  CHECK(dev < 1e-6);
}

TEST_CASE("zero-duration propagate returns the single input frame") {
  const Grid1D g(-8.0, 8.0, 401);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = harmonic_ground_state(g, 1.0, 1.0, 1.0);
  const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 0.0, 1e-3);
  CHECK(h.size() == 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(h.frame_values(0)[i] == psi0.values()[i]);
  }
}

TEST_CASE("ground state density is stationary along the history") {
  const Grid1D g = ground_grid();
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = harmonic_ground_state(g, 1.0, 1.0, 1.0);
  const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 1.0, 1e-3, 100);
  const auto rho0 = born_density(psi0);
  for (std::size_t k = 1; k < h.size(); ++k) {
    const auto rho = born_density(h.frame(k));
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dev = std::max(dev, std::abs(rho.values()[i] - rho0.values()[i]));
    }
    CHECK(dev < 1e-6);
  }
}

TEST_CASE("norm drift stays tiny over ten thousand steps") {
  const Grid1D g(-10.0, 10.0, 601);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  Wavefunction psi = gaussian_packet(g, 1.0, 0.5);
  SolverConfig cfg;
  for (int k = 0; k < 10000; ++k) psi = step(psi, V, kUnit, 1e-3, cfg);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-6);
}

TEST_CASE("energy expectation is conserved") {
  const Grid1D g(-10.0, 10.0, 1001);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = gaussian_packet(g, 1.2, 0.4, 0.7);
  const double e0 = energy_expectation(psi0, V, kUnit);
  const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 2.0, 1e-3, 400);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double e = energy_expectation(h.frame(k), V, kUnit);
    CHECK(std::abs(e - e0) / std::abs(e0) < 1e-6);
  }
}

TEST_CASE("halving dt improves the step error at second order") {
  const Grid1D g(-10.0, 10.0, 801);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = gaussian_packet(g, 1.0, 0.5);

  // reference: very fine dt
  const WavefunctionHistory ref = propagate(psi0, V, kUnit, 0.0, 0.25, 1.25e-5, 100000);
  const auto& ref_end = ref.frame_values(ref.size() - 1);
  auto err_at = [&](double dt) {
    const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 0.25, dt, 100000);
    const auto& end = h.frame_values(h.size() - 1);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dev = std::max(dev, std::abs(end[i] - ref_end[i]));
    }
    return dev;
  };
  const double e1 = err_at(4e-3);
  const double e2 = err_at(2e-3);
  CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("step rejects bad dt and periodic grids") {
  const Grid1D g(-8.0, 8.0, 201);
  const auto V = ScalarPotential::free_particle(g);
  const Wavefunction psi = gaussian_packet(g, 0.0, 0.5);
  CHECK_THROWS_AS(step(psi, V, kUnit, 0.0), ConfigError);
  CHECK_THROWS_AS(step(psi, V, kUnit, 1.0), ConfigError);  // above dt_max
  const Grid1D gp(-8.0, 8.0, 201, Boundary::periodic);
  const auto Vp = ScalarPotential::free_particle(gp);
  std::vector<cplx> vals(gp.size(), cplx(1.0, 0.0));
  const Wavefunction psip = normalize(Wavefunction(gp, vals, 0.0));
  CHECK_THROWS_AS(step(psip, Vp, kUnit, 1e-3), ConfigError);
}

TEST_CASE("history restriction and frame lookup") {
  const Grid1D g(-8.0, 8.0, 201);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  const Wavefunction psi0 = harmonic_ground_state(g, 1.0, 1.0, 1.0);
  const WavefunctionHistory h = propagate(psi0, V, kUnit, 0.0, 1.0, 1e-2, 10);
  CHECK(h.nearest_frame(0.52) == h.nearest_frame(0.5));
  const WavefunctionHistory r = h.restricted(0.3, 0.7);
  CHECK(r.t_begin() == doctest::Approx(0.3));
  CHECK(r.t_end() == doctest::Approx(0.7));
}
