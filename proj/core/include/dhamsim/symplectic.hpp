#pragma once

#include <functional>

#include <Eigen/Core>

#include "dhamsim/errors.hpp"

namespace dhamsim {

class DissipationSpec;

using Vector = Eigen::VectorXd;

/// A point z = (x, y) of the phase space R^n x R^n. `x` holds generalized
/// coordinates and `y` the conjugate momenta.
struct PhasePoint {
  Vector x;
  Vector y;

  PhasePoint() = default;
  /// Throws InvalidDimension if the blocks differ in length and DomainError
  /// if an entry is not finite.
  PhasePoint(Vector x_block, Vector y_block);

  static PhasePoint Zero(Eigen::Index n);

  Eigen::Index dim() const { return x.size(); }

  /// (x, y) stacked into one vector of length 2n.
  Vector stacked() const;
  static PhasePoint FromStacked(const Vector& z);

  PhasePoint& operator+=(const PhasePoint& other);
  PhasePoint& operator-=(const PhasePoint& other);
  PhasePoint& operator*=(double s);

  friend PhasePoint operator+(PhasePoint a, const PhasePoint& b) { return a += b; }
  friend PhasePoint operator-(PhasePoint a, const PhasePoint& b) { return a -= b; }
  friend PhasePoint operator*(double s, PhasePoint a) { return a *= s; }
  friend bool operator==(const PhasePoint& a, const PhasePoint& b) {
    return a.x == b.x && a.y == b.y;
  }
};

/// Callbacks describing a time dependent function f(t, x, y) together with
/// its partial derivatives. Used both for Hamiltonians and for the test
/// observables of the weak formulation.
struct HamiltonianOracle {
  std::function<double(double, const PhasePoint&)> value;
  std::function<Vector(double, const PhasePoint&)> grad_x;
  std::function<Vector(double, const PhasePoint&)> grad_y;
  /// Explicit time partial. A null callback means autonomous.
  std::function<double(double, const PhasePoint&)> dt;

  // Checked evaluation; callback failures become OracleError.
  double Value(double t, const PhasePoint& z) const;
  Vector GradX(double t, const PhasePoint& z) const;
  Vector GradY(double t, const PhasePoint& z) const;
  double TimePartial(double t, const PhasePoint& z) const;
};

/// ω(z1, z2) = <x1, y2> - <x2, y1>.
double omega(const PhasePoint& z1, const PhasePoint& z2);

/// X_h(z) = (D_y h, -D_x h).
PhasePoint symplectic_gradient(const HamiltonianOracle& h, double t,
                               const PhasePoint& z);

/// {f, g}(z) = ω(X_f(z), X_g(z)).
double poisson_bracket(const HamiltonianOracle& f, const HamiltonianOracle& g,
                       double t, const PhasePoint& z);

/// Maps a symplectic subgradient candidate w = (a, b) to the conventional
/// subgradient (-b, a), i.e. the vector ξ with <ξ, v> = ω(w, v) for all v.
Vector symplectic_to_conventional(const PhasePoint& w);

/// Distance of ż - X_H(z) (seen as a conventional subgradient) to the
/// subdifferential of the dissipation at ż. The dissipation acts either on
/// the full rate ż (dimension 2n) or on its coordinate block ẋ (dimension
/// n); in the latter case the momentum block of the subdifferential is {0}.
/// Zero exactly when ż - X_H ∈ X(R)(ż).
double inclusion_residual(const HamiltonianOracle& h, const DissipationSpec& r,
                          double t, const PhasePoint& z,
                          const PhasePoint& zdot);

/// Slack of the test-function inequality
///   R(z, ż - X_f) - R(z, ż) - d/dt[f∘z] + {f, H}(z),
/// with d/dt[f∘z] = <D_x f, ẋ> + <D_y f, ẏ> + ∂f/∂t. Nonnegative for every f
/// whenever the inclusion holds. May be +inf if ż - X_f leaves dom R.
double test_inequality(const HamiltonianOracle& h, const DissipationSpec& r,
                       const HamiltonianOracle& f, double t,
                       const PhasePoint& z, const PhasePoint& zdot);

/// Largest relative deviation of the oracle gradients from centered finite
/// differences with step 1e-6 * (1 + |z|), measured as
/// |g - g_fd| / max(1, |g_fd|).
double gradient_check(const HamiltonianOracle& h, double t,
                      const PhasePoint& z);

inline constexpr double kGradientTolerance = 1e-5;

namespace observables {

/// H = ½ (|x|² + |y|²).
HamiltonianOracle HarmonicOscillator();
/// f(z) = ½ zᵀ Q z + <c, z> with Q symmetric (2n x 2n) and z stacked.
HamiltonianOracle Quadratic(Eigen::MatrixXd q, Vector c);
/// f(z) = x_i.
HamiltonianOracle CoordinateX(Eigen::Index i);
/// f(z) = y_j.
HamiltonianOracle CoordinateY(Eigen::Index j);
/// f(z) = ω(z, anchor); its symplectic gradient is the constant -anchor.
HamiltonianOracle Linear(PhasePoint anchor);
/// f ≡ value.
HamiltonianOracle Constant(double value);

}  // namespace observables

}  // namespace dhamsim
