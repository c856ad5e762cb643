#include "dhamsim/symplectic.hpp"

#include <cmath>
#include <exception>
#include <string>
#include <utility>

#include "dhamsim/dissipation.hpp"

namespace dhamsim {

namespace {

template <typename Fn>
auto guarded(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw OracleError(std::string(what) + ": " + e.what());
  }
}

void require_same_dim(const PhasePoint& a, const PhasePoint& b,
                      const char* what) {
  if (a.dim() != b.dim()) {
    throw InvalidDimension(what, static_cast<std::size_t>(a.dim()),
                           static_cast<std::size_t>(b.dim()));
  }
}

Vector checked_gradient(const std::function<Vector(double, const PhasePoint&)>& fn,
                        const char* what, double t, const PhasePoint& z) {
  if (!fn) throw OracleError(std::string(what) + ": callback not set");
  Vector g = guarded(what, [&] { return fn(t, z); });
  if (g.size() != z.dim()) {
    throw OracleError(std::string(what) + ": returned size " +
                      std::to_string(g.size()) + " for dimension " +
                      std::to_string(z.dim()));
  }
  if (!g.allFinite()) throw OracleError(std::string(what) + ": non-finite value");
  return g;
}

// Splits a rate/state pair into the block the dissipation acts on. Specs of
// dimension n act on the x block; specs of dimension 2n (and Zero) on the
// whole stacked vector.
bool acts_on_x_block(const DissipationSpec& r, Eigen::Index n) {
  if (r.is_zero()) return false;
  if (r.dim() == n) return true;
  if (r.dim() == 2 * n) return false;
  throw InvalidDimension("dissipation spec vs phase space",
                         static_cast<std::size_t>(2 * n),
                         static_cast<std::size_t>(r.dim()));
}

double eval_on(const DissipationSpec& r, const PhasePoint& z,
               const PhasePoint& rate) {
  if (acts_on_x_block(r, z.dim())) return eval(r, z.x, rate.x);
  return eval(r, z.stacked(), rate.stacked());
}

}  // namespace

PhasePoint::PhasePoint(Vector x_block, Vector y_block)
    : x(std::move(x_block)), y(std::move(y_block)) {
  if (x.size() != y.size()) {
    throw InvalidDimension("PhasePoint blocks", static_cast<std::size_t>(x.size()),
                           static_cast<std::size_t>(y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw DomainError("PhasePoint: non-finite entry");
  }
}

PhasePoint PhasePoint::Zero(Eigen::Index n) {
  return PhasePoint(Vector::Zero(n), Vector::Zero(n));
}

Vector PhasePoint::stacked() const {
  Vector z(2 * dim());
  z << x, y;
  return z;
}

PhasePoint PhasePoint::FromStacked(const Vector& z) {
  if (z.size() % 2 != 0) {
    throw InvalidDimension("stacked phase vector must have even length",
                           static_cast<std::size_t>(z.size() + 1),
                           static_cast<std::size_t>(z.size()));
  }
  const Eigen::Index n = z.size() / 2;
  return PhasePoint(z.head(n), z.tail(n));
}

PhasePoint& PhasePoint::operator+=(const PhasePoint& other) {
  require_same_dim(*this, other, "PhasePoint +");
  x += other.x;
  y += other.y;
  return *this;
}

PhasePoint& PhasePoint::operator-=(const PhasePoint& other) {
  require_same_dim(*this, other, "PhasePoint -");
  x -= other.x;
  y -= other.y;
  return *this;
}

PhasePoint& PhasePoint::operator*=(double s) {
  x *= s;
  y *= s;
  return *this;
}

double HamiltonianOracle::Value(double t, const PhasePoint& z) const {
  if (!value) throw OracleError("value: callback not set");
  const double v = guarded("value", [&] { return value(t, z); });
  if (!std::isfinite(v)) throw OracleError("value: non-finite result");
  return v;
}

Vector HamiltonianOracle::GradX(double t, const PhasePoint& z) const {
  return checked_gradient(grad_x, "grad_x", t, z);
}

Vector HamiltonianOracle::GradY(double t, const PhasePoint& z) const {
  return checked_gradient(grad_y, "grad_y", t, z);
}

double HamiltonianOracle::TimePartial(double t, const PhasePoint& z) const {
  if (!dt) return 0.0;
  const double v = guarded("dt", [&] { return dt(t, z); });
  if (!std::isfinite(v)) throw OracleError("dt: non-finite result");
  return v;
}

double omega(const PhasePoint& z1, const PhasePoint& z2) {
  require_same_dim(z1, z2, "omega");
  return z1.x.dot(z2.y) - z2.x.dot(z1.y);
}

PhasePoint symplectic_gradient(const HamiltonianOracle& h, double t,
                               const PhasePoint& z) {
  PhasePoint out;
  out.x = h.GradY(t, z);
  out.y = -h.GradX(t, z);
  return out;
}

double poisson_bracket(const HamiltonianOracle& f, const HamiltonianOracle& g,
                       double t, const PhasePoint& z) {
  return omega(symplectic_gradient(f, t, z), symplectic_gradient(g, t, z));
}

Vector symplectic_to_conventional(const PhasePoint& w) {
  Vector xi(2 * w.dim());
  xi << -w.y, w.x;
  return xi;
}

double inclusion_residual(const HamiltonianOracle& h, const DissipationSpec& r,
                          double t, const PhasePoint& z,
                          const PhasePoint& zdot) {
  require_same_dim(z, zdot, "inclusion_residual");
  const PhasePoint w = zdot - symplectic_gradient(h, t, z);
  const Vector xi = symplectic_to_conventional(w);
  const Eigen::Index n = z.dim();
  if (acts_on_x_block(r, n)) {
    // The momentum block of ∂R is {0}: its contribution is |ẋ - D_y H|.
    const double dist_x = subdiff_distance(r, zdot.x, xi.head(n));
    return std::hypot(dist_x, xi.tail(n).norm());
  }
  return subdiff_distance(r, zdot.stacked(), xi);
}

double test_inequality(const HamiltonianOracle& h, const DissipationSpec& r,
                       const HamiltonianOracle& f, double t,
                       const PhasePoint& z, const PhasePoint& zdot) {
  require_same_dim(z, zdot, "test_inequality");
  const PhasePoint xf = symplectic_gradient(f, t, z);
  const double r_shifted = eval_on(r, z, zdot - xf);
  const double r_rate = eval_on(r, z, zdot);
  const double df_dt = f.GradX(t, z).dot(zdot.x) + f.GradY(t, z).dot(zdot.y) +
                       f.TimePartial(t, z);
  const double bracket = omega(xf, symplectic_gradient(h, t, z));
  return r_shifted - r_rate - df_dt + bracket;
}

double gradient_check(const HamiltonianOracle& h, double t,
                      const PhasePoint& z) {
  const Vector s = z.stacked();
  const double step = 1e-6 * (1.0 + s.norm());
  const Eigen::Index n = z.dim();
  Vector analytic(2 * n);
  analytic << h.GradX(t, z), h.GradY(t, z);
  Vector fd(2 * n);
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    Vector plus = s;
    Vector minus = s;
    plus(i) += step;
    minus(i) -= step;
    fd(i) = (h.Value(t, PhasePoint::FromStacked(plus)) -
             h.Value(t, PhasePoint::FromStacked(minus))) /
            (2.0 * step);
  }
  if (2 * n == 0) return 0.0;
  return (analytic - fd).lpNorm<Eigen::Infinity>() /
         std::max(1.0, fd.lpNorm<Eigen::Infinity>());
}

namespace observables {

HamiltonianOracle HarmonicOscillator() {
  HamiltonianOracle h;
  h.value = [](double, const PhasePoint& z) {
    return 0.5 * (z.x.squaredNorm() + z.y.squaredNorm());
  };
  h.grad_x = [](double, const PhasePoint& z) -> Vector { return z.x; };
  h.grad_y = [](double, const PhasePoint& z) -> Vector { return z.y; };
  return h;
}

HamiltonianOracle Quadratic(Eigen::MatrixXd q, Vector c) {
  if (q.rows() != q.cols() || q.rows() != c.size() || c.size() % 2 != 0) {
    throw InvalidDimension("Quadratic observable", static_cast<std::size_t>(q.rows()),
                           static_cast<std::size_t>(c.size()));
  }
  const Eigen::MatrixXd sym = 0.5 * (q + q.transpose());
  const Eigen::Index n = c.size() / 2;
  HamiltonianOracle f;
  f.value = [sym, c](double, const PhasePoint& z) {
    const Vector s = z.stacked();
    return 0.5 * s.dot(sym * s) + c.dot(s);
  };
  f.grad_x = [sym, c, n](double, const PhasePoint& z) -> Vector {
    return (sym * z.stacked() + c).head(n);
  };
  f.grad_y = [sym, c, n](double, const PhasePoint& z) -> Vector {
    return (sym * z.stacked() + c).tail(n);
  };
  return f;
}

HamiltonianOracle CoordinateX(Eigen::Index i) {
  HamiltonianOracle f;
  f.value = [i](double, const PhasePoint& z) { return z.x(i); };
  f.grad_x = [i](double, const PhasePoint& z) -> Vector {
    return Vector::Unit(z.dim(), i);
  };
  f.grad_y = [](double, const PhasePoint& z) -> Vector {
    return Vector::Zero(z.dim());
  };
  return f;
}

HamiltonianOracle CoordinateY(Eigen::Index j) {
  HamiltonianOracle f;
  f.value = [j](double, const PhasePoint& z) { return z.y(j); };
  f.grad_x = [](double, const PhasePoint& z) -> Vector {
    return Vector::Zero(z.dim());
  };
  f.grad_y = [j](double, const PhasePoint& z) -> Vector {
    return Vector::Unit(z.dim(), j);
  };
  return f;
}

HamiltonianOracle Linear(PhasePoint anchor) {
  HamiltonianOracle f;
  f.value = [anchor](double, const PhasePoint& z) { return omega(z, anchor); };
  f.grad_x = [anchor](double, const PhasePoint&) -> Vector { return anchor.y; };
  f.grad_y = [anchor](double, const PhasePoint&) -> Vector { return -anchor.x; };
  return f;
}

HamiltonianOracle Constant(double value) {
  HamiltonianOracle f;
  f.value = [value](double, const PhasePoint&) { return value; };
  f.grad_x = [](double, const PhasePoint& z) -> Vector {
    return Vector::Zero(z.dim());
  };
  f.grad_y = [](double, const PhasePoint& z) -> Vector {
    return Vector::Zero(z.dim());
  };
  return f;
}

}  // namespace observables

}  // namespace dhamsim
