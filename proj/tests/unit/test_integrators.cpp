#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dhamsim/damage1d.hpp"
#include "dhamsim/integrators.hpp"
#include "dhamsim/scenario.hpp"
#include "oracles.hpp"

using namespace dhamsim;

namespace {

PhasePoint scalar_point(double q, double p) {
  return PhasePoint(Vector::Constant(1, q), Vector::Constant(1, p));
}

std::vector<double> positions(const Trajectory& traj) {
  std::vector<double> q;
  for (const PhasePoint& z : traj.states) q.push_back(z.x(0));
  return q;
}

}  // namespace

TEST_CASE("validate catches inconsistent systems") {
  SplitSystem sys = CoulombOscillator(1.0, 1.0, 0.1);
  sys.a_diag = Vector::Constant(2, 1.0);
  CHECK_THROWS_AS(sys.validate(), InvalidDimension);
  sys = CoulombOscillator(1.0, 1.0, 0.1);
  sys.a_diag(0) = -1.0;
  CHECK_THROWS_AS(sys.validate(), DomainError);
  CHECK_THROWS_AS(CoulombOscillator(1.0, -1.0, 0.1), DomainError);
  CHECK_THROWS_AS(step_split(CoulombOscillator(1, 1, 0.1), 0.0, scalar_point(1, 0), 0.0),
                  DomainError);
}

TEST_CASE("zero dissipation step is symplectic Euler") {
  const SplitSystem sys = HarmonicChain(1);
  const double dt = 0.1;
  const StepResult r = step_split(sys, 0.0, scalar_point(0.8, -0.3), dt);
  const double p = -0.3 - dt * 0.8;
  CHECK(r.state.y(0) == doctest::Approx(p));
  CHECK(r.state.x(0) == doctest::Approx(0.8 + dt * p));
  CHECK(r.dissipation_increment == 0.0);
}

TEST_CASE("Coulomb stick and slip steps") {
  const double mu = 0.3;
  const SplitSystem sys = CoulombOscillator(1.0, 1.0, mu);
  for (double q : {-0.3, -0.1, 0.0, 0.25, 0.3}) {
    const StepResult r = step_split(sys, 0.0, scalar_point(q, 0.0), 1e-3);
    CHECK(r.state.x(0) == q);
    CHECK(r.state.y(0) == 0.0);
  }
  // Slip: v⁺ minimizes ½(v - (v - dt q))² + dt μ |v|.
  const double dt = 0.05;
  for (double v : {0.9, -0.4, 0.02}) {
    const double q = 0.6;
    const StepResult r = step_split(sys, 0.0, scalar_point(q, v), dt);
    const double w = v - dt * q;
    const double expected = oracle::argmin_1d(
        [&](double x) { return 0.5 * (x - w) * (x - w) + dt * mu * std::abs(x); }, -5, 5);
    CHECK(r.state.y(0) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(r.state.x(0) == doctest::Approx(q + dt * r.state.y(0)));
    CHECK(r.dissipation_increment == doctest::Approx(dt * mu * std::abs(r.state.y(0))));
  }
}

TEST_CASE("quadratic Hamiltonian: bounded energy error without drift") {
  const SplitSystem sys = HarmonicChain(2);
  const PhasePoint z0(Vector::Constant(2, 1.0), Vector::Constant(2, 0.5));
  const double dt = 1e-2;
  const Trajectory traj = run(sys, z0, 0.0, 100.0, dt);
  CHECK(traj.size() == 10001);
  const double h0 = traj.ledger[0].hamiltonian;
  double first = 0.0, last = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double err = std::abs(traj.ledger[k].hamiltonian - h0);
    CHECK(err <= 2.0 * dt * h0);
    if (k < traj.size() / 10) first = std::max(first, err);
    if (k > 9 * traj.size() / 10) last = std::max(last, err);
  }
  CHECK(last <= 1.1 * first);
}

TEST_CASE("run lands exactly on t1 and reports blow-ups with the step") {
  const SplitSystem sys = HarmonicChain(1);
  const Trajectory traj = run(sys, scalar_point(1, 0), 0.0, 1.05, 0.1);
  CHECK(traj.times.back() == 1.05);
  CHECK(traj.size() == 12);
  try {
    run(sys, scalar_point(1, 0), 0.0, 1e4, 2.5);
    FAIL("expected a blow-up");
  } catch (const NumericalBlowup& e) {
    CHECK(e.step() > 10);
  }
}

TEST_CASE("Coulomb oscillator against the closed-form stick-slip solution") {
  const oracle::CoulombExact exact{1.0, 1.0, 0.1, 1.0};
  const SplitSystem sys = CoulombOscillator(1.0, 1.0, 0.1);
  const double dt = 1e-4;
  const Trajectory traj = run(sys, scalar_point(1.0, 0.0), 0.0, 6.0 * std::numbers::pi, dt);
  double err = 0.0;
  for (std::size_t k = 0; k < traj.size(); k += 100) {
    err = std::max(err, std::abs(traj.states[k].x(0) - exact.position(traj.times[k])));
  }
  CHECK(err < 1e-3);

  const std::vector<Peak> peaks = positive_peaks(traj.times, positions(traj));
  const std::vector<double> expected = exact.positive_peaks();
  REQUIRE(peaks.size() == expected.size());
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    CHECK(peaks[i].value == doctest::Approx(expected[i]).epsilon(2e-3));
  }
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    CHECK(std::abs(peaks[i - 1].value - peaks[i].value - 0.4) <= 0.02 * 0.4);
  }
  CHECK(std::abs(traj.states.back().x(0)) <= 0.1 + 1e-3);
  CHECK(std::abs(traj.states.back().x(0) - exact.final_position()) < 1e-3);
}

TEST_CASE("eta dominates the dissipated energy") {
  const SplitSystem sys = CoulombOscillator(1.0, 1.0, 0.1);
  const Trajectory traj = run(sys, scalar_point(1.0, 0.0), 0.0, 20.0, 1e-3);
  const std::vector<double> eta = accumulate_eta(sys, traj);
  double sum = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    sum += traj.dissipation_increments[k];
    CHECK(eta[k] >= sum - 1e-10);
  }
  // With a 2-homogeneous dissipation η counts ⟨v, ξ⟩ = 2R.
  const SplitSystem visc = ViscousOscillator(1.0, 1.0, 0.2);
  const Trajectory vt = run(visc, scalar_point(1.0, 0.0), 0.0, 10.0, 1e-3);
  const std::vector<double> veta = accumulate_eta(visc, vt);
  double vsum = 0.0;
  for (double inc : vt.dissipation_increments) vsum += inc;
  CHECK(veta.back() == doctest::Approx(2.0 * vsum).epsilon(1e-9));
}

TEST_CASE("eta vanishes to first order on an exact conservative flow") {
  const SplitSystem sys = HarmonicChain(1);
  for (double dt : {1e-2, 1e-3}) {
    Trajectory traj;
    for (int k = 0; k * dt <= 5.0 + 1e-12; ++k) {
      const double t = k * dt;
      traj.times.push_back(t);
      traj.states.push_back(scalar_point(std::cos(t), -std::sin(t)));
      traj.dissipation_increments.push_back(0.0);
    }
    const std::vector<double> eta = accumulate_eta(sys, traj);
    double worst = 0.0;
    for (double e : eta) worst = std::max(worst, std::abs(e));
    CHECK(worst <= 5.0 * dt);
  }
}

TEST_CASE("energy audit") {
  // Static state: residual is exactly zero.
  const SplitSystem chain = HarmonicChain(2);
  const Trajectory still = run(chain, PhasePoint::Zero(2), 0.0, 1.0, 0.1);
  CHECK(energy_audit(chain, still) == 0.0);

  auto ratios = [](const SplitSystem& sys, const PhasePoint& z0, double t1,
                   std::vector<double> dts) {
    std::vector<double> res;
    for (double dt : dts) res.push_back(energy_audit(sys, run(sys, z0, 0.0, t1, dt)));
    std::vector<double> out;
    for (std::size_t i = 1; i < res.size(); ++i) out.push_back(res[i - 1] / res[i]);
    return out;
  };
  for (double r : ratios(chain, PhasePoint(Vector::Constant(2, 1.0), Vector::Zero(2)), 10.0,
                         {1e-2, 5e-3, 2.5e-3, 1.25e-3})) {
    CHECK(r >= 1.7);
    CHECK(r <= 2.3);
  }
  const SplitSystem coulomb = CoulombOscillator(1.0, 1.0, 0.1);
  for (double r : ratios(coulomb, scalar_point(1.0, 0.0), 4.0 * std::numbers::pi,
                         {1e-3, 5e-4, 2.5e-4, 1.25e-4})) {
    CHECK(r >= 1.7);
    CHECK(r <= 2.3);
  }
}

TEST_CASE("time-dependent energy: audit includes the external power") {
  // Forced oscillator E = ½ q² - f(t) q with f = sin t.
  SplitSystem sys = HarmonicChain(1);
  sys.energy = [](double t, const Vector& q, const Vector&) {
    return 0.5 * q.squaredNorm() - std::sin(t) * q(0);
  };
  sys.energy_grad_q1 = [](double t, const Vector& q, const Vector&) -> Vector {
    return q - Vector::Constant(1, std::sin(t));
  };
  sys.energy_dt = [](double t, const Vector& q, const Vector&) {
    return -std::cos(t) * q(0);
  };
  const double coarse = energy_audit(sys, run(sys, scalar_point(0, 0), 0.0, 10.0, 2e-3));
  const double fine = energy_audit(sys, run(sys, scalar_point(0, 0), 0.0, 10.0, 1e-3));
  CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("damage bar as a split system") {
  using namespace dhamsim::damage;
  const Grid1D grid(21, 1.0);
  const MaterialParams params{1.0, 1.0, 0.1, 0.1, 1.0};
  const Loading loading = Loading::Ramp(2.0);
  const SplitAdapter adapter = make_split_system(grid, params, Modulation::kQuadratic, loading);
  adapter.system.validate();
  DamageScenario sc;
  sc.grid = grid;
  sc.params = params;
  sc.loading = loading;
  DamageState s = initial_state(sc);
  const double dt = 0.2 * stable_dt(grid, params, s).dt;
  PhasePoint z = adapter.to_phase(s, grid);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(z);
  traj.dissipation_increments.push_back(0.0);
  for (int k = 0; k < 600; ++k) {
    const double t = k * dt;
    const DamageState next = dynamic_step(s, grid, params, Modulation::kQuadratic, loading, t, dt);
    const StepResult r = step_split(adapter.system, t, z, dt);
    const DamageState mapped = adapter.from_phase(r.state, t + dt, grid, loading);
    CHECK((mapped.u - next.u).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((mapped.d - next.d).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((mapped.y - next.y).lpNorm<Eigen::Infinity>() < 1e-12);
    for (int i = 1; i < grid.n_nodes() - 1; ++i) CHECK(std::abs(mapped.p(i) - next.p(i)) < 1e-12);
    s = next;
    z = r.state;
    traj.times.push_back(t + dt);
    traj.states.push_back(z);
    traj.dissipation_increments.push_back(r.dissipation_increment);
  }
  REQUIRE(s.d.maxCoeff() > 0.0);
  const std::vector<double> eta = accumulate_eta(adapter.system, traj);
  const double bound = params.beta * grid.node_weights().dot(s.d);
  CHECK(eta.back() >= bound - 1e-10);
}
