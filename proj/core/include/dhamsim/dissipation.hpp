#pragma once

#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dhamsim/errors.hpp"

namespace dhamsim {

using Vector = Eigen::VectorXd;

/// +∞, the value of a dissipation outside its effective domain.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Slack allowed on the damage box [0, 1] to absorb rounding drift.
inline constexpr double kBoxSlack = 1e-12;

/// A convex, nonnegative dissipation function R(state, rate) with R(., 0) = 0.
/// All catalog members are separable across components, which makes the
/// proximal map and the subdifferential available in closed form.
class DissipationSpec {
 public:
  /// R ≡ 0. Accepts rates of any dimension.
  struct Zero {};
  /// R(v) = ½ Σ w_i v_i².
  struct Rayleigh {
    Vector weights;
  };
  /// R(v) = Σ β_i |v_i|.
  struct WeightedNorm {
    Vector beta;
  };
  /// R(d, v) = Σ cell_i β v_i + χ_[0,1](d) + χ_[0,∞)(v), the one-sided
  /// damage dissipation. `cell_weights` are quadrature weights per node.
  struct DamageDissipation {
    double beta = 0.0;
    Vector cell_weights;
  };

  using Kind = std::variant<Zero, Rayleigh, WeightedNorm, DamageDissipation>;

  static DissipationSpec MakeZero() { return DissipationSpec(Zero{}); }
  static DissipationSpec MakeRayleigh(Vector weights);
  static DissipationSpec MakeWeightedNorm(Vector beta);
  static DissipationSpec MakeDamage(double beta, Vector cell_weights);

  const Kind& kind() const { return kind_; }
  /// 1 for Zero, WeightedNorm and DamageDissipation; 2 for Rayleigh.
  int homogeneity() const;
  /// Number of rate components, or -1 for Zero (any size).
  Eigen::Index dim() const;
  bool is_zero() const { return std::holds_alternative<Zero>(kind_); }
  bool is_damage() const { return std::holds_alternative<DamageDissipation>(kind_); }
  const char* name() const;

 private:
  explicit DissipationSpec(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// R(state, rate); +∞ outside the domain. `state` is only read by the damage
/// dissipation and may be empty otherwise.
double eval(const DissipationSpec& spec, const Vector& state,
            const Vector& rate);

/// argmin_v ½|v - w|² + τ R(v), with the state frozen. Per-component step
/// sizes are accepted so diagonal metrics can be folded in.
Vector prox(const DissipationSpec& spec, const Vector& w, double tau);
Vector prox(const DissipationSpec& spec, const Vector& w, const Vector& tau);

/// Euclidean norm of the componentwise distances from ξ_i to ∂R_i(v_i).
/// Throws DomainError when `rate` is outside dom R.
double subdiff_distance(const DissipationSpec& spec, const Vector& rate,
                        const Vector& xi);

/// A piecewise linear curve through `points` at strictly increasing `times`.
struct CurvePolyline {
  std::vector<double> times;
  std::vector<Vector> points;

  /// Throws InvalidDimension / DomainError on malformed input.
  void validate() const;
  Vector at(double t) const;
};

/// Σ_k R(z_k, (z_{k+1} - z_k) / Δt_k) Δt_k.
double dissipation_length(const DissipationSpec& spec,
                          const CurvePolyline& curve);

/// Infimum of dissipation lengths between z1 and z2, attained by the straight
/// segment for the catalog metrics. Only defined for 1-homogeneous specs.
double dissipation_distance(const DissipationSpec& spec, const Vector& z1,
                            const Vector& z2);

/// Tolerance and depth of the partition refinement in dissipation_variation.
inline constexpr double kVariationTolerance = 1e-10;
inline constexpr int kVariationMaxDepth = 20;

/// Supremum over partitions of Σ D(z(s_{j-1}), z(s_j)), estimated by nested
/// dyadic refinement of the vertex partition.
double dissipation_variation(const DissipationSpec& spec,
                             const CurvePolyline& curve);

}  // namespace dhamsim
