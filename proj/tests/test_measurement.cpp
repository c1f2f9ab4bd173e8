#include <doctest.h>

#include <cmath>
#include <complex>

#include "nsm/drift.hpp"
#include "nsm/errors.hpp"
#include "nsm/estimators.hpp"
#include "nsm/measurement.hpp"
#include "nsm/schrodinger.hpp"

using namespace nsm;

namespace {

const PhysicalParams kUnit(1.0, 1.0);

WavefunctionHistory ground_reference(double t_end, std::size_t n = 2401,
                                     std::size_t stride = 10) {
  const Grid1D g(-8.0, 8.0, n);
  const auto V = ScalarPotential::harmonic(g, 1.0);
  return propagate(harmonic_ground_state(g, 1.0, 1.0, 1.0), V, kUnit, 0.0, t_end,
                   1e-3, stride);
}

}  // namespace

TEST_CASE("bayes posterior identities") {
  const Grid1D g(-8.0, 8.0, 1601);
  const Density rho = gaussian_density(g, 0.0, 0.5);

  SUBCASE("whole-grid window is the identity") {
    const auto ev = MeasurementEvent::window(0.0, {{-8.0, 8.0}});
    const Density post = bayes_posterior(rho, ev);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(post.values()[i] == doctest::Approx(rho.values()[i]).epsilon(1e-12));
    }
  }

  SUBCASE("half-line window doubles the density") {
    const auto ev = MeasurementEvent::window(0.0, {{0.0, 8.0}});
    // prior mass of D is one half (the oracle for the normalization)
    std::vector<double> masked(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.node(i) >= 0.0) masked[i] = rho.values()[i];
    }
    CHECK(trapezoid(g, masked) == doctest::Approx(0.5).epsilon(0.01));

    const Density post = bayes_posterior(rho, ev);
    CHECK(post.total_mass() == doctest::Approx(1.0).epsilon(1e-8));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.node(i);
      if (x < 0.0) {
        CHECK(post.values()[i] == 0.0);
      } else if (x < 4.0) {
        CHECK(post.values()[i] ==
              doctest::Approx(2.0 * rho.values()[i]).epsilon(0.02));
      }
    }
  }

  SUBCASE("negligible window mass raises") {
    const auto ev = MeasurementEvent::window(0.0, {{7.2, 7.8}});
    CHECK_THROWS_AS(bayes_posterior(rho, ev), NegligibleMassError);
  }

  SUBCASE("explicit posterior passes through after validation") {
    const Density post_in = gaussian_density(g, 1.0, 0.2);
    const auto ev = MeasurementEvent::from_posterior(0.5, post_in);
    const Density post = bayes_posterior(rho, ev);
    CHECK(post.time() == 0.5);
    CHECK(post.total_mass() == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("window intervals must be disjoint") {
    CHECK_THROWS_AS(MeasurementEvent::window(0.0, {{0.0, 2.0}, {1.0, 3.0}}),
                    ConfigError);
  }
}

TEST_CASE("mollified window keeps its mass inside D") {
  const Grid1D g(-8.0, 8.0, 1601);
  const auto ev = MeasurementEvent::window(0.0, {{0.0, 3.0}}, 3.0 * g.dx());
  const auto w = window_weight(g, ev);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    if (x < 0.0 || x > 3.0) CHECK(w[i] == 0.0);
  }
  // ramp reaches 1 inside
  CHECK(w[g.cell_index(1.5)] == 1.0);
}

TEST_CASE("collapse wavefunction keeps modulus and phase contracts") {
  const Grid1D g(-8.0, 8.0, 1601);

  SUBCASE("identity collapse") {
    const Wavefunction psi = gaussian_packet(g, 0.3, 0.5, 1.1);
    const Wavefunction tilde = collapse_wavefunction(psi, born_density(psi));
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (tilde.values()[i] == cplx(0.0, 0.0)) continue;  // sub-floor tail
      CHECK(std::abs(tilde.values()[i] - psi.values()[i]) < 1e-12);
    }
  }

  SUBCASE("real positive state stays real and nonnegative") {
    const Wavefunction psi = harmonic_ground_state(g, 1.0, 1.0, 1.0);
    const auto ev = MeasurementEvent::window(0.0, {{0.0, 8.0}});
    const Density post = bayes_posterior(born_density(psi), ev);
    const Wavefunction tilde = collapse_wavefunction(psi, post);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(tilde.values()[i].imag() == 0.0);
      CHECK(tilde.values()[i].real() >= 0.0);
      CHECK(std::abs(std::norm(tilde.values()[i]) - post.values()[i]) < 1e-12);
    }
  }

  SUBCASE("plane-wave phase passes through the window") {
    const double k0 = 1.7;
    const Wavefunction psi = gaussian_packet(g, 0.0, 0.5, k0);
    const auto ev = MeasurementEvent::window(0.0, {{-1.0, 1.0}});
    const Density post = bayes_posterior(born_density(psi), ev);
    const Wavefunction tilde = collapse_wavefunction(psi, post);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(tilde.values()[i]) == 0.0) continue;
      const double want = std::arg(psi.values()[i]);
      const double got = std::arg(tilde.values()[i]);
      CHECK(std::abs(std::remainder(got - want, 2.0 * M_PI)) < 1e-12);
    }
  }

  SUBCASE("posterior mass where the phase is lost raises") {
    std::vector<cplx> vals(g.size(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.node(i) < 0.0) vals[i] = std::exp(-0.5 * g.node(i) * g.node(i));
    }
    const Wavefunction half = normalize(Wavefunction(g, vals, 0.0));
    const Density bad = gaussian_density(g, 2.0, 0.2);
    CHECK_THROWS_AS(collapse_wavefunction(half, bad), PhaseUndefinedError);
  }

  SUBCASE("collapse commutes with a global phase") {
    const Wavefunction psi = gaussian_packet(g, 0.0, 0.5, 0.9);
    const auto ev = MeasurementEvent::window(0.0, {{-0.5, 2.5}});
    const Density post = bayes_posterior(born_density(psi), ev);
    const cplx phase = std::exp(cplx(0.0, 0.77));
    std::vector<cplx> rotated(psi.values());
    for (cplx& z : rotated) z *= phase;
    const Wavefunction a = collapse_wavefunction(psi, post);
    const Wavefunction b =
        collapse_wavefunction(Wavefunction(g, rotated, 0.0), post);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(b.values()[i] - phase * a.values()[i]) < 1e-14);
    }
  }
}

TEST_CASE("whole-grid measurement leaves the process unchanged") {
  const WavefunctionHistory ref = ground_reference(1.0);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  const auto ev = MeasurementEvent::window(0.5, {{-8.0, 8.0}});
  const CollapseResult res =
      post_measurement_process(ref, ev, V, kUnit, 1e-3, 1.0);

  const WavefunctionHistory win = ref.restricted(0.5, 1.0);
  REQUIRE(res.psi_tilde_history.size() == win.size());
  for (std::size_t k = 0; k < win.size(); ++k) {
    double dev = 0.0;
    for (std::size_t i = 0; i < ref.grid().size(); ++i) {
      dev = std::max(dev, std::abs(res.psi_tilde_history.frame_values(k)[i] -
                                   win.frame_values(k)[i]));
    }
    CHECK(dev < 1e-8);
  }

  // phi is identically zero, so the PDE residual vanishes
  const ResidualReport rep = collapse_pde_residual(res, kUnit);
  CHECK(rep.rms <= 1e-10);
  CHECK(rep.ic_max_dev <= 1e-12);
}

TEST_CASE("half-line collapse of the ground state") {
  const WavefunctionHistory ref = ground_reference(2.0);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  const auto ev = MeasurementEvent::window(1.0, {{0.0, 8.0}});
  const CollapseResult res =
      post_measurement_process(ref, ev, V, kUnit, 1e-3, 2.0);

  SUBCASE("the post-measurement state is genuinely non-stationary") {
    const Density d0 = born_density(res.psi_tilde_history.frame(0));
    const Density d1 = born_density(
        res.psi_tilde_history.frame(res.psi_tilde_history.size() - 1));
    CHECK(tv_distance(d0, d1) > 0.05);
  }

  SUBCASE("every frame stays normalized") {
    for (std::size_t k = 0; k < res.psi_tilde_history.size(); ++k) {
      CHECK(std::abs(res.psi_tilde_history.frame(k).norm() - 1.0) < 1e-6);
    }
  }

  SUBCASE("repetition probability is one at the collapse time and leaks later") {
    CHECK(std::abs(repetition_probability(res, {{0.0, 8.0}}) - 1.0) < 1e-10);
    const double later = repetition_probability(res, {{0.0, 8.0}}, 1.2);
    CHECK(later < 1.0 - 1e-3);
  }

  SUBCASE("initial condition of the exponential transform") {
    const ResidualReport rep = collapse_pde_residual(res, kUnit);
    CHECK(rep.ic_max_dev <= 1e-10);
    CHECK(rep.n_points > 1000);
  }

  SUBCASE("sampled post-measurement ensemble obeys the Born rule") {
    // mollified window: the sharp cut's clamped drift artifacts would
    // slingshot paths off the grid
    const auto evm =
        MeasurementEvent::window(1.0, {{0.0, 8.0}}, 3.0 * ref.grid().dx());
    const CollapseResult resm =
        post_measurement_process(ref, evm, V, kUnit, 1e-3, 2.0);
    const DriftHistory drifts =
        DriftHistory::from_history(resm.psi_tilde_history, kUnit);
    SamplerConfig cfg;
    cfg.n_paths = 50000;
    cfg.dt = 0.01;
    cfg.seed = 404;
    const TrajectoryEnsemble ens =
        sample_forward(resm.rho_tilde_t1, drifts, kUnit, 1.0, 2.0, cfg);
    const std::size_t k = resm.psi_tilde_history.nearest_frame(1.5);
    const Density emp =
        empirical_density(ens, resm.psi_tilde_history.times()[k], 64);
    const Density truth =
        born_density(normalize(resm.psi_tilde_history.frame(k)));
    CHECK(tv_distance(emp, truth) <= 0.02);
  }
}

TEST_CASE("two-sided narrow window re-spreads with conserved probability") {
  const WavefunctionHistory ref = ground_reference(1.5);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  const auto ev = MeasurementEvent::window(0.5, {{-0.4, 0.4}});
  const CollapseResult res =
      post_measurement_process(ref, ev, V, kUnit, 1e-3, 1.5);
  for (std::size_t k = 0; k < res.psi_tilde_history.size(); ++k) {
    CHECK(std::abs(res.psi_tilde_history.frame(k).norm() - 1.0) < 1e-6);
  }
  // it spreads: variance grows from the windowed value
  const double v0 = born_density(res.psi_tilde_history.frame(0)).variance();
  const double v1 = born_density(
      res.psi_tilde_history.frame(res.psi_tilde_history.size() - 1)).variance();
  CHECK(v1 > 2.0 * v0);
}

TEST_CASE("collapse phase invariance holds pointwise at the collapse time") {
  const WavefunctionHistory ref = ground_reference(1.0, 1601, 100);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  // boosted state so the phase is nontrivial
  const Grid1D& g = ref.grid();
  const Wavefunction psi0 = gaussian_packet(g, -1.0, 0.5, 2.0);
  const WavefunctionHistory ref2 = propagate(psi0, V, kUnit, 0.0, 1.0, 1e-3, 100);
  const auto ev = MeasurementEvent::window(0.5, {{-2.0, 2.0}});
  const CollapseResult res =
      post_measurement_process(ref2, ev, V, kUnit, 1e-3, 1.0);

  const std::size_t k1 = ref2.nearest_frame(0.5);
  const auto& a = res.psi_tilde_history.frame_values(0);
  const auto& b = ref2.frame_values(k1);
  double amax = 0.0, bmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    amax = std::max(amax, std::abs(a[i]));
    bmax = std::max(bmax, std::abs(b[i]));
  }
  std::size_t checked = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::abs(a[i]) > 1e-12 * amax && std::abs(b[i]) > 1e-12 * bmax) {
      const double d = std::remainder(std::arg(a[i]) - std::arg(b[i]), 2.0 * M_PI);
      CHECK(std::abs(d) < 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("collapse PDE residual shrinks under refinement") {
  auto residual_at = [](std::size_t n, double dt, std::size_t stride) {
    const Grid1D g(-8.0, 8.0, n);
    const auto V = ScalarPotential::harmonic(g, 1.0);
    const WavefunctionHistory ref = propagate(
        harmonic_ground_state(g, 1.0, 1.0, 1.0), V, kUnit, 0.0, 1.0, dt, stride);
    // fixed physical mollifier width across levels, so the collapsed state
    // is the same C^3 function at every resolution
    const auto ev = MeasurementEvent::window(0.3, {{0.0, 8.0}}, 0.12);
    const CollapseResult res =
        post_measurement_process(ref, ev, V, kUnit, dt, 0.8);
    return collapse_pde_residual(res, kUnit).rms;
  };
  // halve dx and dt together (frame spacing follows dt through the stride)
  const double r0 = residual_at(401, 4e-3, 5);
  const double r1 = residual_at(801, 2e-3, 5);
  const double r2 = residual_at(1601, 1e-3, 5);
  CHECK(r0 / r1 >= 3.0);
  CHECK(r1 / r2 >= 3.0);
}

TEST_CASE("coherence: longer horizon restricts to the shorter run") {
  const WavefunctionHistory ref = ground_reference(2.0);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  const auto ev = MeasurementEvent::window(0.5, {{0.0, 8.0}});
  const CollapseResult shorter =
      post_measurement_process(ref, ev, V, kUnit, 1e-3, 1.25);
  const CollapseResult longer =
      post_measurement_process(ref, ev, V, kUnit, 1e-3, 2.0);
  const WavefunctionHistory cut =
      longer.psi_tilde_history.restricted(0.5, 1.25);
  REQUIRE(cut.size() == shorter.psi_tilde_history.size());
  for (std::size_t k = 0; k < cut.size(); ++k) {
    double dev = 0.0;
    for (std::size_t i = 0; i < ref.grid().size(); ++i) {
      dev = std::max(dev, std::abs(cut.frame_values(k)[i] -
                                   shorter.psi_tilde_history.frame_values(k)[i]));
    }
    CHECK(dev <= 1e-10);
  }
}

TEST_CASE("branch tracking rejects a phase sweep faster than pi/2 per frame") {
  const Grid1D g(-8.0, 8.0, 201);
  std::vector<double> times{0.0, 0.1, 0.2};
  std::vector<std::vector<cplx>> ref_frames, fast_frames;
  for (double t : times) {
    std::vector<cplx> base(g.size()), fast(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double amp = std::exp(-0.25 * g.node(i) * g.node(i));
      base[i] = amp;
      fast[i] = amp * std::exp(cplx(0.0, 20.0 * t));  // 2 rad per frame
    }
    ref_frames.push_back(base);
    fast_frames.push_back(fast);
  }
  const WavefunctionHistory ref(g, times, ref_frames);
  const WavefunctionHistory fast(g, times, fast_frames);
  CHECK_THROWS_AS(log_ratio_history(fast, ref), BranchAmbiguityError);
}

TEST_CASE("event time must sit on a reference frame") {
  const WavefunctionHistory ref = ground_reference(1.0);
  const auto V = ScalarPotential::harmonic(ref.grid(), 1.0);
  const auto ev = MeasurementEvent::window(0.5123, {{0.0, 8.0}});
  CHECK_THROWS_AS(post_measurement_process(ref, ev, V, kUnit, 1e-3, 1.0),
                  ConfigError);
}
