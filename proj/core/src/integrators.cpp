#include "dhamsim/integrators.hpp"

#include <cmath>
#include <string>

namespace dhamsim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError("SplitSystem: " + what);
}

Vector checked(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw OracleError(std::string(what) + ": returned size " +
                      std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
  if (!v.allFinite()) throw OracleError(std::string(what) + ": non-finite value");
  return v;
}

Vector stack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

void SplitSystem::validate() const {
  require(n1 >= 0 && n2 >= 0 && n1 + n2 > 0, "empty system");
  require(static_cast<bool>(energy), "energy callback missing");
  require(n1 == 0 || (energy_grad_q1 && kinetic && kinetic_grad),
          "conservative block callbacks missing");
  require(n2 == 0 || static_cast<bool>(energy_grad_q2), "energy_grad_q2 missing");
  if (a_diag.size() != n2) {
    throw InvalidDimension("SplitSystem a_diag", static_cast<std::size_t>(n2),
                           static_cast<std::size_t>(a_diag.size()));
  }
  require(a_diag.allFinite() && (a_diag.array() > 0.0).all(),
          "A must be positive definite");
  if (!dissipation.is_zero() && dissipation.dim() != n2) {
    throw InvalidDimension("SplitSystem dissipation", static_cast<std::size_t>(n2),
                           static_cast<std::size_t>(dissipation.dim()));
  }
}

double SplitSystem::hamiltonian(double t, const PhasePoint& z) const {
  const Vector p2v = p2(z);
  const double kin = n1 > 0 ? kinetic(p1(z)) : 0.0;
  return kin + 0.5 * (a_diag.array() * p2v.array().square()).sum() +
         energy(t, q1(z), q2(z));
}

double SplitSystem::hamiltonian_dt(double t, const PhasePoint& z) const {
  return energy_dt ? energy_dt(t, q1(z), q2(z)) : 0.0;
}

HamiltonianOracle SplitSystem::oracle() const {
  HamiltonianOracle h;
  const SplitSystem sys = *this;
  h.value = [sys](double t, const PhasePoint& z) { return sys.hamiltonian(t, z); };
  h.grad_x = [sys](double t, const PhasePoint& z) -> Vector {
    const Vector a = sys.q1(z);
    const Vector b = sys.q2(z);
    Vector g1 = sys.n1 > 0 ? sys.energy_grad_q1(t, a, b) : Vector();
    Vector g2 = sys.n2 > 0 ? sys.energy_grad_q2(t, a, b) : Vector();
    return stack(g1, g2);
  };
  h.grad_y = [sys](double, const PhasePoint& z) -> Vector {
    Vector g1 = sys.n1 > 0 ? sys.kinetic_grad(sys.p1(z)) : Vector();
    Vector g2 = sys.a_diag.cwiseProduct(sys.p2(z));
    return stack(g1, g2);
  };
  if (energy_dt) {
    h.dt = [sys](double t, const PhasePoint& z) { return sys.hamiltonian_dt(t, z); };
  }
  return h;
}

StepResult step_split(const SplitSystem& sys, double t, const PhasePoint& z,
                      double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("step_split: dt must be positive");
  }
  if (z.dim() != sys.n1 + sys.n2) {
    throw InvalidDimension("step_split state", static_cast<std::size_t>(sys.n1 + sys.n2),
                           static_cast<std::size_t>(z.dim()));
  }
  const Vector q1 = sys.q1(z);
  const Vector q2 = sys.q2(z);

  // Conservative block: symplectic Euler, momentum first.
  Vector p1_next = sys.p1(z);
  Vector q1_next = q1;
  if (sys.n1 > 0) {
    p1_next -= dt * checked(sys.energy_grad_q1(t, q1, q2), sys.n1, "energy_grad_q1");
    q1_next += dt * checked(sys.kinetic_grad(p1_next), sys.n1, "kinetic_grad");
  }

  // Dissipative block: with v = A p2⁺ the inclusion
  //   p2⁺ ∈ p2 - dt D_q2 E - dt ∂ρ(A p2⁺)
  // becomes v = prox_{dt A ρ}(A w) componentwise, w = p2 - dt D_q2 E, with
  // D_q2 E taken at (t + dt, q1⁺, q2).
  Vector p2_next(sys.n2);
  Vector q2_next = q2;
  double increment = 0.0;
  if (sys.n2 > 0) {
    const Vector w =
        sys.p2(z) - dt * checked(sys.energy_grad_q2(t + dt, q1_next, q2), sys.n2,
                                 "energy_grad_q2");
    const Vector rate = prox(sys.dissipation, sys.a_diag.cwiseProduct(w),
                             Vector(dt * sys.a_diag));
    p2_next = rate.cwiseQuotient(sys.a_diag);
    q2_next = q2 + dt * rate;
    if (sys.dissipation.is_damage()) {
      for (Eigen::Index i = 0; i < sys.n2; ++i) {
        if (q2_next(i) >= 1.0) {
          q2_next(i) = 1.0;
          p2_next(i) = 0.0;
        }
      }
    }
    increment = dt * eval(sys.dissipation, q2, (q2_next - q2) / dt);
  }

  StepResult out;
  out.state.x = stack(q1_next, q2_next);
  out.state.y = stack(p1_next, p2_next);
  if (!out.state.x.allFinite() || !out.state.y.allFinite() ||
      !std::isfinite(increment)) {
    throw NumericalBlowup("step_split: non-finite state", 0);
  }
  out.dissipation_increment = increment;
  return out;
}

Trajectory run(const SplitSystem& sys, const PhasePoint& z0, double t0,
               double t1, double dt) {
  sys.validate();
  if (!(t1 > t0)) throw DomainError("run: t1 must exceed t0");
  if (!(dt > 0.0)) throw DomainError("run: dt must be positive");

  Trajectory traj;
  const double h0 = sys.hamiltonian(t0, z0);
  traj.times.push_back(t0);
  traj.states.push_back(z0);
  traj.dissipation_increments.push_back(0.0);
  traj.ledger.push_back({h0, 0.0, 0.0, 0.0});

  const auto steps =
      static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  double work = 0.0;
  double dissipated = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = traj.times.back();
    const double h = (k + 1 == steps) ? t1 - t : dt;
    const PhasePoint& z = traj.states.back();
    StepResult step;
    try {
      step = step_split(sys, t, z, h);
    } catch (const NumericalBlowup&) {
      throw NumericalBlowup("run: non-finite state", k + 1);
    }
    work += h * sys.hamiltonian_dt(t, z);
    dissipated += step.dissipation_increment;
    const double t_next = (k + 1 == steps) ? t1 : t + h;
    const double hn = sys.hamiltonian(t_next, step.state);
    traj.times.push_back(t_next);
    traj.states.push_back(std::move(step.state));
    traj.dissipation_increments.push_back(step.dissipation_increment);
    traj.ledger.push_back({hn, work, dissipated, hn + dissipated - h0 - work});
  }
  return traj;
}

std::vector<double> accumulate_eta(const SplitSystem& sys,
                                   const Trajectory& traj) {
  std::vector<double> eta(traj.size(), 0.0);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double t = traj.times[k];
    const PhasePoint& z = traj.states[k];
    const PhasePoint& zn = traj.states[k + 1];
    // X_H with each gradient taken where the scheme evaluates it.
    PhasePoint stage = PhasePoint::Zero(sys.n1 + sys.n2);
    if (sys.n1 > 0) {
      stage.x.head(sys.n1) = sys.kinetic_grad(sys.p1(zn));
      stage.y.head(sys.n1) = -sys.energy_grad_q1(t, sys.q1(z), sys.q2(z));
    }
    if (sys.n2 > 0) {
      // Rate actually applied: A p2⁺ except where the damage clamp fired.
      stage.x.tail(sys.n2) = (sys.q2(zn) - sys.q2(z)) / (traj.times[k + 1] - t);
      stage.y.tail(sys.n2) = -sys.energy_grad_q2(traj.times[k + 1], sys.q1(zn), sys.q2(z));
    }
    eta[k + 1] = eta[k] + omega(zn - z, stage);
  }
  return eta;
}

double energy_audit(const SplitSystem& sys, const Trajectory& traj) {
  if (traj.size() == 0) return 0.0;
  const double h0 = sys.hamiltonian(traj.times[0], traj.states[0]);
  double work = 0.0;
  double dissipated = 0.0;
  double worst = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double dt = traj.times[k] - traj.times[k - 1];
    work += dt * sys.hamiltonian_dt(traj.times[k - 1], traj.states[k - 1]);
    dissipated += traj.dissipation_increments[k];
    const double residual =
        h0 + work - sys.hamiltonian(traj.times[k], traj.states[k]) - dissipated;
    worst = std::max(worst, std::abs(residual));
  }
  return worst;
}

SplitSystem CoulombOscillator(double mass, double stiffness, double friction) {
  if (!(mass > 0.0) || !(stiffness > 0.0) || !(friction > 0.0)) {
    throw DomainError("CoulombOscillator: parameters must be positive");
  }
  SplitSystem sys;
  sys.n1 = 0;
  sys.n2 = 1;
  sys.energy = [stiffness](double, const Vector&, const Vector& q) {
    return 0.5 * stiffness * q.squaredNorm();
  };
  sys.energy_grad_q1 = [](double, const Vector&, const Vector&) { return Vector(); };
  sys.energy_grad_q2 = [stiffness](double, const Vector&, const Vector& q) -> Vector {
    return stiffness * q;
  };
  sys.a_diag = Vector::Constant(1, 1.0 / mass);
  sys.dissipation = DissipationSpec::MakeWeightedNorm(Vector::Constant(1, friction));
  return sys;
}

SplitSystem ViscousOscillator(double mass, double stiffness, double damping) {
  SplitSystem sys = CoulombOscillator(mass, stiffness, 1.0);
  sys.dissipation = DissipationSpec::MakeRayleigh(Vector::Constant(1, damping));
  return sys;
}

SplitSystem HarmonicChain(Eigen::Index n) {
  SplitSystem sys;
  sys.n1 = n;
  sys.n2 = 0;
  sys.energy = [](double, const Vector& q, const Vector&) {
    return 0.5 * q.squaredNorm();
  };
  sys.energy_grad_q1 = [](double, const Vector& q, const Vector&) -> Vector { return q; };
  sys.energy_grad_q2 = [](double, const Vector&, const Vector&) { return Vector(); };
  sys.kinetic = [](const Vector& p) { return 0.5 * p.squaredNorm(); };
  sys.kinetic_grad = [](const Vector& p) -> Vector { return p; };
  sys.a_diag = Vector();
  return sys;
}

}  // namespace dhamsim
