#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dhamsim/integrators.hpp"
#include "dhamsim/quasistatic.hpp"

namespace dhamsim::damage {

/// Uniform grid on [0, length] with n_nodes ≥ 3 nodes. Displacement, damage
/// and its momentum live on nodes; strains on the n_nodes - 1 cells.
class Grid1D {
 public:
  Grid1D(int n_nodes, double length);

  int n_nodes() const { return n_nodes_; }
  int n_cells() const { return n_nodes_ - 1; }
  double length() const { return length_; }
  double h() const { return length_ / (n_nodes_ - 1); }
  double x(int i) const { return i * h(); }
  /// Lumped (trapezoidal) quadrature weights: h inside, h/2 at both ends.
  Vector node_weights() const;

 private:
  int n_nodes_;
  double length_;
};

/// Stiffness modulation φ(d): decreasing on [0, 1], φ(0) = 1, φ(1) = 0.
enum class Modulation { kQuadratic, kCubic };

double phi(Modulation m, double d);
double phi_prime(Modulation m, double d);
/// "quadratic" -> (1-d)², "cubic" -> (1-d)³. Throws DomainError otherwise.
Modulation modulation_from_string(const std::string& tag);
std::string to_string(Modulation m);

/// Elastic stiffness K_e, toughness γ, regularization length c, activation
/// threshold β and mass density ρ. The gradient, local and micro-inertia
/// constants follow the Ambrosio-Tortorelli choice and are always derived.
struct MaterialParams {
  double K_e = 1.0;
  double gamma = 1.0;
  double c = 0.1;
  double beta = 0.0;
  double rho = 1.0;

  double K() const { return gamma * c; }
  double L() const { return gamma / c; }
  double b() const { return gamma * c; }
  /// γ √(1 + c²).
  double damage_speed() const;

  void validate() const;
};

/// Nodal fields: displacement u, momentum density p = ρ u̇, damage d and its
/// conjugate y (ḋ = b y).
struct DamageState {
  Vector u;
  Vector p;
  Vector d;
  Vector y;

  static DamageState Zero(const Grid1D& grid);
  /// Throws InvalidDimension on size mismatch and DomainError when d leaves
  /// [0, 1] or y is negative.
  void validate(const Grid1D& grid) const;
};

/// External loading. The left end is clamped; the right end is either
/// displacement or traction controlled. `right_rate` is the time derivative
/// of `right_value` and is used for the exact load power.
struct Loading {
  enum class EndControl { kDisplacement, kTraction };

  EndControl right = EndControl::kDisplacement;
  std::function<double(double)> right_value;
  std::function<double(double)> right_rate;
  /// Body force f(t, x) and its time derivative; null means none.
  std::function<double(double, double)> body_force;
  std::function<double(double, double)> body_force_rate;

  double value(double t) const { return right_value ? right_value(t) : 0.0; }
  double rate(double t) const { return right_rate ? right_rate(t) : 0.0; }

  static Loading None();
  /// u_D(t) = rate t, held at `cap` once reached (cap ≤ 0 means never).
  static Loading Ramp(double rate, double cap = 0.0);
  static Loading Hold(double amplitude);
  /// u_D(t) = amplitude sin(omega t).
  static Loading Sine(double amplitude, double omega);
};

struct DamageScenario {
  Grid1D grid{101, 1.0};
  MaterialParams params;
  Modulation modulation = Modulation::kQuadratic;
  Loading loading = Loading::None();
  double t_end = 1.0;
  /// Time step; empty selects stable_dt / refine.
  std::optional<double> dt;
  double cfl_factor = 0.5;
  int snapshot_every = 100;
  /// Initial damage; empty means intact.
  std::optional<Vector> initial_damage;
};

/// Cell strains (u_{i+1} - u_i) / h.
Vector strain(const Vector& u, const Grid1D& grid);

/// Per cell φ̄ ½ K_e u_x², with φ̄ the mean of φ over the two cell nodes.
Vector elastic_energy_density(const DamageState& state, const Grid1D& grid,
                              const MaterialParams& params,
                              Modulation m = Modulation::kQuadratic);

/// Components of the discrete free energy.
struct FreeEnergy {
  double elastic = 0.0;
  double gradient = 0.0;
  double local = 0.0;
  double total() const { return elastic + gradient + local; }
};

FreeEnergy free_energy(const DamageState& state, const Grid1D& grid,
                       const MaterialParams& params,
                       Modulation m = Modulation::kQuadratic);

/// G = L d + φ'(d) w̄(u_x) - K Δ_h d at the nodes, with w̄ the nodal mean of
/// the adjacent cell energies ½ K_e u_x² and homogeneous Neumann ghosts in
/// the Laplacian. Equals (1/m_i) ∂Ψ/∂d_i for the lumped weights m_i.
Vector driving_force(const DamageState& state, const Grid1D& grid,
                     const MaterialParams& params,
                     Modulation m = Modulation::kQuadratic);

/// Nodal internal force -∂Ψ/∂u_i.
Vector internal_force(const Vector& u, const Vector& d, const Grid1D& grid,
                      const MaterialParams& params, Modulation m);

/// One explicit step in four sweeps: momentum, displacement (plus boundary
/// data at t + dt), damage momentum by the resolvent
/// y⁺ = max(0, y - dt (G(u⁺, d) + β)), then d⁺ = min(1, d + dt b y⁺) with y⁺
/// zeroed where d⁺ saturates. Throws NumericalBlowup on non-finite fields.
DamageState dynamic_step(const DamageState& state, const Grid1D& grid,
                         const MaterialParams& params, Modulation m,
                         const Loading& loading, double t, double dt);

struct StableDt {
  double dt = 0.0;
  double elastic_speed = 0.0;
  double damage_speed = 0.0;
};

/// cfl_factor · h / max(√(K_e max φ(d) / ρ), γ √(1 + c²)).
StableDt stable_dt(const Grid1D& grid, const MaterialParams& params,
                   const DamageState& state, Modulation m = Modulation::kQuadratic,
                   double cfl_factor = 0.5);

struct LedgerRow {
  double t = 0.0;
  double elastic = 0.0;
  double kinetic_u = 0.0;
  double kinetic_d = 0.0;
  double grad_d = 0.0;
  double local_d = 0.0;
  double dissipated = 0.0;
  double work = 0.0;
  double residual = 0.0;

  double hamiltonian() const {
    return elastic + kinetic_u + kinetic_d + grad_d + local_d;
  }
};

struct Snapshot {
  double t = 0.0;
  DamageState state;
};

struct ConstraintViolations {
  int damage_out_of_box = 0;
  int damage_decrease = 0;
  int negative_y = 0;
  int negative_increment = 0;
  int total() const {
    return damage_out_of_box + damage_decrease + negative_y + negative_increment;
  }
};

struct Diagnostics {
  double dt = 0.0;
  std::size_t steps = 0;
  double elastic_speed = 0.0;
  /// γ √(1 + c²).
  double speed_estimate = 0.0;
  std::optional<double> front_speed;
  double max_residual = 0.0;
  double total_dissipated = 0.0;
  ConstraintViolations violations;
  bool blowup = false;
  std::size_t blowup_step = 0;
};

struct DynamicResult {
  std::vector<LedgerRow> ledger;
  std::vector<Snapshot> snapshots;
  DamageState final_state;
  Diagnostics diagnostics;

  /// Throws NumericalBlowup if the run diverged.
  void require_ok() const;
};

/// Initial state: d from the scenario, u in static equilibrium with the
/// boundary data at t = 0, p = y = 0.
DamageState initial_state(const DamageScenario& scenario);

/// Time loop of dynamic_step on a uniform grid (dt shrunk so that t_end is hit
/// exactly). The ledger uses the energy conserved by the staggered
/// elastodynamic update: the elastic term pairs consecutive displacements,
/// ½ φ̄ K_e ε(u^{k-1}) ε(u^k), and the external work is the matching
/// centered sum. On divergence the partial result is returned with
/// diagnostics.blowup set.
DynamicResult run_dynamic(const DamageScenario& scenario);

/// Least-squares speed of the threshold front of d over the propagation
/// window, or nullopt if fewer than two snapshots reach the threshold.
std::optional<double> front_speed(const std::vector<Snapshot>& snapshots,
                                  const Grid1D& grid, double threshold = 0.5);

/// Measure of {d ≥ threshold} with linear interpolation between nodes.
double band_width(const Vector& d, const Grid1D& grid, double threshold = 0.5);

/// Counts constraint violations along a snapshot sequence.
ConstraintViolations check_constraints(const std::vector<Snapshot>& snapshots);

/// The bar as a SplitSystem: q1 = displacement at unconstrained nodes,
/// q2 = d, p1 = m_i p_i, p2 = m_i y_i, A = b / m_i and a damage dissipation
/// with the lumped weights. step_split on this system reproduces
/// dynamic_step.
struct SplitAdapter {
  SplitSystem system;
  std::vector<int> free_nodes;

  PhasePoint to_phase(const DamageState& s, const Grid1D& grid) const;
  DamageState from_phase(const PhasePoint& z, double t, const Grid1D& grid,
                         const Loading& loading) const;
};

SplitAdapter make_split_system(const Grid1D& grid, const MaterialParams& params,
                               Modulation m, const Loading& loading);

// ---- quasistatic Ambrosio-Tortorelli evolution -------------------------

struct AltMinResult {
  Vector u;
  Vector d;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Static equilibrium displacement for damage d at time t.
Vector solve_displacement(const Vector& d, const Grid1D& grid,
                          const MaterialParams& params, Modulation m,
                          const Loading& loading, double t);

/// Alternate minimization of E(t, u, d) + β Σ m_i (d_i - d_prev_i) over
/// u (tridiagonal solve) and d ∈ [d_prev, 1] (projected Gauss-Seidel),
/// starting from (u, d).
AltMinResult at_alternate_minimization(const Vector& u, const Vector& d,
                                       const Grid1D& grid,
                                       const MaterialParams& params,
                                       Modulation m, double t,
                                       const Loading& loading,
                                       const Vector& d_prev,
                                       const SolverConfig& cfg = {});

/// The Ambrosio-Tortorelli bar as an energetic problem on q = (u, d) with
/// the damage distance on the d block and the alternate minimizer attached.
EnergeticProblem make_at_problem(const Grid1D& grid, const MaterialParams& params,
                                 Modulation m, const Loading& loading);

/// Competitors for the stability surrogate: homogeneous damage increments on
/// a 32-point grid and single-node bumps of 0.01 and 0.1, each with the
/// displacement re-equilibrated.
std::vector<Vector> standard_competitors(const Vector& q, const Grid1D& grid,
                                         const MaterialParams& params,
                                         Modulation m, const Loading& loading,
                                         double t);

struct QuasistaticResult {
  QuasistaticTrajectory trajectory;
  std::vector<LedgerRow> ledger;
  double max_residual = 0.0;
  double max_stability_violation = 0.0;
};

/// Incremental minimization at load steps t_k = k dt up to t_end (dt from
/// the scenario or t_end / 100). `check_stability` evaluates the surrogate at
/// every step.
QuasistaticResult run_quasistatic_at(const DamageScenario& scenario,
                                     bool check_stability = false,
                                     const SolverConfig& cfg = {});

}  // namespace dhamsim::damage
