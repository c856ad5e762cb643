#pragma once

#include <functional>
#include <vector>

#include "dhamsim/dissipation.hpp"
#include "dhamsim/symplectic.hpp"

namespace dhamsim {

/// Dissipative Hamiltonian system split into a conservative block (q1, p1)
/// and a dissipative block (q2, p2):
///
///   H(t, q, p) = K(p1) + ½ <A p2, p2> + E(t, q1, q2),   R = ρ(q̇2),
///
/// with A = diag(a_diag) positive. Phase points are laid out as
/// x = (q1, q2), y = (p1, p2).
struct SplitSystem {
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;

  std::function<double(double, const Vector&, const Vector&)> energy;
  std::function<Vector(double, const Vector&, const Vector&)> energy_grad_q1;
  std::function<Vector(double, const Vector&, const Vector&)> energy_grad_q2;
  /// Explicit ∂E/∂t; null means autonomous.
  std::function<double(double, const Vector&, const Vector&)> energy_dt;

  std::function<double(const Vector&)> kinetic;
  std::function<Vector(const Vector&)> kinetic_grad;

  Vector a_diag;
  DissipationSpec dissipation = DissipationSpec::MakeZero();

  /// Throws InvalidDimension / DomainError when the description is
  /// inconsistent (sizes, missing callbacks, non-positive A).
  void validate() const;

  double hamiltonian(double t, const PhasePoint& z) const;
  /// ∂H/∂t = ∂E/∂t.
  double hamiltonian_dt(double t, const PhasePoint& z) const;
  /// H wrapped as an oracle for the symplectic-core operations.
  HamiltonianOracle oracle() const;

  Vector q1(const PhasePoint& z) const { return z.x.head(n1); }
  Vector q2(const PhasePoint& z) const { return z.x.tail(n2); }
  Vector p1(const PhasePoint& z) const { return z.y.head(n1); }
  Vector p2(const PhasePoint& z) const { return z.y.tail(n2); }
};

struct StepResult {
  PhasePoint state;
  /// dt · R(q2, (q2⁺ - q2) / dt), always ≥ 0.
  double dissipation_increment = 0.0;
};

/// One step of the split semi-implicit scheme: symplectic Euler on
/// (q1, p1), then proximal backward Euler on (q2, p2) using the updated q1
/// at t + dt. With a damage
/// dissipation q2 is additionally clamped to ≤ 1 and p2 zeroed where the
/// clamp is active.
StepResult step_split(const SplitSystem& sys, double t, const PhasePoint& z,
                      double dt);

/// H, ∫∂H/∂t, dissipated energy, and
/// residual = H(t) + dissipated - H(0) - ∫∂H/∂t.
struct EnergyLedger {
  double hamiltonian = 0.0;
  double external_power_integral = 0.0;
  double dissipated = 0.0;
  double residual = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  /// Entry k is the increment of the step that produced states[k]; entry 0
  /// is 0.
  std::vector<double> dissipation_increments;
  std::vector<EnergyLedger> ledger;

  std::size_t size() const { return times.size(); }
};

/// Uniform stepping from t0 to t1; the last step is shortened to land on t1.
/// Throws NumericalBlowup carrying the failing step index.
Trajectory run(const SplitSystem& sys, const PhasePoint& z0, double t0,
               double t1, double dt);

/// Discrete η(t_k) = Σ ω(z_{j+1} - z_j, X_j), where X_j is the symplectic
/// gradient of H with every partial derivative evaluated at the stage the
/// scheme uses: D_q1 E at (t, q1, q2), D_p K at p1⁺, D_q2 E at
/// (t + dt, q1⁺, q2) and the applied rate (q2⁺ - q2) / dt, which is A p2⁺
/// unless the damage clamp fired. Each increment is then dt <q̇2, ξ> with
/// ξ ∈ ∂ρ(q̇2), or larger at a clamped node, so η ≥ Σ increments step by step.
std::vector<double> accumulate_eta(const SplitSystem& sys,
                                   const Trajectory& traj);

/// max_k |H(0, z0) + Σ dt ∂H/∂t - H(t_k, z_k) - Diss(z, [0, t_k])|, with the
/// time integral by the left-point rule and Diss as the running sum of step
/// increments. Requires a dissipation depending only on q̇2.
double energy_audit(const SplitSystem& sys, const Trajectory& traj);

/// Mass-spring oscillator with dry friction μ|q̇|: the whole state is the
/// dissipative block, K ≡ 0, A = 1/m, E = ½ k q².
SplitSystem CoulombOscillator(double mass, double stiffness, double friction);

/// Same oscillator with Rayleigh damping ½ c q̇² instead of dry friction.
SplitSystem ViscousOscillator(double mass, double stiffness, double damping);

/// n uncoupled unit oscillators in the conservative block only.
SplitSystem HarmonicChain(Eigen::Index n);

}  // namespace dhamsim
