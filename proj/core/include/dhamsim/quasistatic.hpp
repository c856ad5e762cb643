#pragma once

#include <functional>
#include <vector>

#include "dhamsim/dissipation.hpp"

namespace dhamsim {

struct SolverConfig {
  /// Stop when the objective decreases by less than this between sweeps.
  double tol = 1e-10;
  int max_outer = 500;
};

struct IncrementalResult {
  Vector state;
  /// E(t_k, q) + D(q_prev, q) at the returned state.
  double objective = 0.0;
  int iterations = 0;
  /// False when max_outer was hit; the best iterate is still returned.
  bool converged = true;
};

/// Rate-independent problem (E, D): stored energy E(t, q) and the
/// dissipation distance induced by `dissipation` on the block
/// q[dissipative_offset, dissipative_offset + dim).
struct EnergeticProblem {
  std::function<double(double, const Vector&)> energy;
  std::function<Vector(double, const Vector&)> energy_grad;
  /// Rate of E along `transport` at time t.
  std::function<double(double, const Vector&)> energy_dt;

  DissipationSpec dissipation = DissipationSpec::MakeZero();
  Eigen::Index dissipative_offset = 0;

  /// Maps a state onto the admissible set at time t (boundary data, box
  /// constraints). Null means every state is admissible.
  std::function<void(double, Vector&)> admissible;

  /// Carries a state admissible at t_from to t_to without changing its
  /// internal variables; the power integral of the energy balance is taken
  /// along this path. Null means project(t_to, q).
  std::function<Vector(double t_from, double t_to, const Vector&)> transport;

  /// Optional problem-specific minimizer for E(t, .) + D(q_prev, .). When
  /// null a proximal gradient method is used.
  std::function<IncrementalResult(const Vector& q_prev, double t,
                                  const SolverConfig&)>
      minimizer;

  double distance(const Vector& from, const Vector& to) const;
  Vector project(double t, Vector q) const;
  Vector carry(double t_from, double t_to, const Vector& q) const;
};

struct QuasistaticTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<double> incremental_values;
  std::vector<double> diss_cumulative;
  int convergence_warnings = 0;
};

/// Approximate argmin_q E(t_k, q) + D(q_prev, q). Never returns a state
/// whose objective exceeds that of the admissible projection of q_prev.
IncrementalResult incremental_step(const EnergeticProblem& prob,
                                   const Vector& q_prev, double t_k,
                                   const SolverConfig& cfg = {});

/// Incremental minimization over `times`; states[0] is the projection of q0.
QuasistaticTrajectory run_incremental(const EnergeticProblem& prob,
                                      const Vector& q0,
                                      const std::vector<double>& times,
                                      const SolverConfig& cfg = {});

/// max over competitors of E(t, q) - E(t, q̂) - D(q, q̂); ≤ tol means stable
/// against the sampled set.
double check_stability(const EnergeticProblem& prob, const Vector& q, double t,
                       const std::vector<Vector>& competitors);

/// Per-step energy balance residual
///   E(t_k, q_k) + Diss[0, t_k] - E(t_0, q_0) - ∫ ∂_t E,
/// where the power integral over [t_{k-1}, t_k] is taken along the frozen
/// state q_{k-1} carried to t_k, by the trapezoidal rule.
std::vector<double> energy_balance_residuals(const EnergeticProblem& prob,
                                             const QuasistaticTrajectory& traj);

/// max_k |energy_balance_residuals|.
double check_energy_balance(const EnergeticProblem& prob,
                            const QuasistaticTrajectory& traj);

}  // namespace dhamsim
