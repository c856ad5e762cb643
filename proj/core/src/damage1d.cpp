#include "dhamsim/damage1d.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dhamsim::damage {

namespace {

// Floor on the cell stiffness in the static solve so that fully damaged
// cells keep the tridiagonal system nonsingular.
constexpr double kStiffnessFloor = 1e-12;

void require_size(const Vector& v, int n, const char* what) {
  if (v.size() != n) {
    throw InvalidDimension(what, static_cast<std::size_t>(n),
                           static_cast<std::size_t>(v.size()));
  }
}

Vector cell_phi(const Vector& d, Modulation m) {
  const Eigen::Index cells = d.size() - 1;
  Vector out(cells);
  for (Eigen::Index c = 0; c < cells; ++c) {
    out(c) = 0.5 * (phi(m, d(c)) + phi(m, d(c + 1)));
  }
  return out;
}

bool displacement_controlled(const Loading& loading) {
  return loading.right == Loading::EndControl::kDisplacement;
}

// External nodal forces at time t (body force with lumped weights plus the
// end traction when traction controlled).
Vector external_force(const Grid1D& grid, const Loading& loading, double t) {
  const int n = grid.n_nodes();
  Vector f = Vector::Zero(n);
  if (loading.body_force) {
    const Vector m = grid.node_weights();
    for (int i = 0; i < n; ++i) f(i) = m(i) * loading.body_force(t, grid.x(i));
  }
  if (!displacement_controlled(loading)) f(n - 1) += loading.value(t);
  return f;
}

Vector external_force_rate(const Grid1D& grid, const Loading& loading, double t) {
  const int n = grid.n_nodes();
  Vector f = Vector::Zero(n);
  if (loading.body_force) {
    const Vector m = grid.node_weights();
    for (int i = 0; i < n; ++i) {
      double rate = 0.0;
      if (loading.body_force_rate) {
        rate = loading.body_force_rate(t, grid.x(i));
      } else {
        const double eps = 1e-6 * (1.0 + std::abs(t));
        rate = (loading.body_force(t + eps, grid.x(i)) -
                loading.body_force(t - eps, grid.x(i))) /
               (2.0 * eps);
      }
      f(i) = m(i) * rate;
    }
  }
  if (!displacement_controlled(loading)) f(n - 1) += loading.rate(t);
  return f;
}

std::vector<bool> free_mask(const Grid1D& grid, const Loading& loading) {
  std::vector<bool> free(static_cast<std::size_t>(grid.n_nodes()), true);
  free.front() = false;
  if (displacement_controlled(loading)) free.back() = false;
  return free;
}

void apply_boundary(Vector& u, const Loading& loading, double t) {
  u(0) = 0.0;
  if (displacement_controlled(loading)) u(u.size() - 1) = loading.value(t);
}

bool all_finite(const DamageState& s) {
  return s.u.allFinite() && s.p.allFinite() && s.d.allFinite() && s.y.allFinite();
}

// Minimizes the nodal restriction of the d-objective on [lo, 1]; f' is
// increasing since the restriction is convex.
template <typename Derivative, typename Curvature>
double minimize_convex_1d(double lo, double start, Derivative&& df,
                          Curvature&& d2f) {
  if (df(lo) >= 0.0) return lo;
  if (df(1.0) <= 0.0) return 1.0;
  double a = lo;
  double b = 1.0;
  double x = std::clamp(start, a, b);
  for (int it = 0; it < 100; ++it) {
    const double g = df(x);
    if (g > 0.0) b = x; else a = x;
    double next = x - g / d2f(x);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 1e-16 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace

Grid1D::Grid1D(int n_nodes, double length) : n_nodes_(n_nodes), length_(length) {
  if (n_nodes < 3) throw DomainError("Grid1D: n_nodes must be at least 3");
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw DomainError("Grid1D: length must be positive");
  }
}

Vector Grid1D::node_weights() const {
  Vector m = Vector::Constant(n_nodes_, h());
  m(0) *= 0.5;
  m(n_nodes_ - 1) *= 0.5;
  return m;
}

double phi(Modulation m, double d) {
  const double s = 1.0 - d;
  return m == Modulation::kQuadratic ? s * s : s * s * s;
}

double phi_prime(Modulation m, double d) {
  const double s = 1.0 - d;
  return m == Modulation::kQuadratic ? -2.0 * s : -3.0 * s * s;
}

namespace {
double phi_second(Modulation m, double d) {
  return m == Modulation::kQuadratic ? 2.0 : 6.0 * (1.0 - d);
}
}  // namespace

Modulation modulation_from_string(const std::string& tag) {
  if (tag == "quadratic") return Modulation::kQuadratic;
  if (tag == "cubic") return Modulation::kCubic;
  throw DomainError("unknown modulation '" + tag + "'");
}

std::string to_string(Modulation m) {
  return m == Modulation::kQuadratic ? "quadratic" : "cubic";
}

double MaterialParams::damage_speed() const {
  return gamma * std::sqrt(1.0 + c * c);
}

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError(std::string(name) + " must be positive");
    }
  };
  positive(K_e, "K_e");
  positive(gamma, "gamma");
  positive(c, "c");
  positive(rho, "rho");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("beta must be nonnegative");
  }
}

DamageState DamageState::Zero(const Grid1D& grid) {
  const int n = grid.n_nodes();
  return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

void DamageState::validate(const Grid1D& grid) const {
  const int n = grid.n_nodes();
  require_size(u, n, "DamageState u");
  require_size(p, n, "DamageState p");
  require_size(d, n, "DamageState d");
  require_size(y, n, "DamageState y");
  if (!all_finite(*this)) throw DomainError("DamageState: non-finite field");
  if ((d.array() < -kBoxSlack).any() || (d.array() > 1.0 + kBoxSlack).any()) {
    throw DomainError("DamageState: d outside [0, 1]");
  }
  if ((y.array() < 0.0).any()) throw DomainError("DamageState: negative y");
}

Loading Loading::None() { return Hold(0.0); }

Loading Loading::Ramp(double rate, double cap) {
  Loading l;
  l.right_value = [rate, cap](double t) {
    const double v = rate * t;
    return cap > 0.0 ? std::min(v, cap) : v;
  };
  l.right_rate = [rate, cap](double t) {
    return (cap > 0.0 && rate * t >= cap) ? 0.0 : rate;
  };
  return l;
}

Loading Loading::Hold(double amplitude) {
  Loading l;
  l.right_value = [amplitude](double) { return amplitude; };
  l.right_rate = [](double) { return 0.0; };
  return l;
}

Loading Loading::Sine(double amplitude, double omega) {
  Loading l;
  l.right_value = [amplitude, omega](double t) { return amplitude * std::sin(omega * t); };
  l.right_rate = [amplitude, omega](double t) {
    return amplitude * omega * std::cos(omega * t);
  };
  return l;
}

Vector strain(const Vector& u, const Grid1D& grid) {
  require_size(u, grid.n_nodes(), "strain u");
  const int cells = grid.n_cells();
  return (u.tail(cells) - u.head(cells)) / grid.h();
}

Vector elastic_energy_density(const DamageState& state, const Grid1D& grid,
                              const MaterialParams& params, Modulation m) {
  require_size(state.d, grid.n_nodes(), "elastic_energy_density d");
  const Vector eps = strain(state.u, grid);
  return (cell_phi(state.d, m).array() * 0.5 * params.K_e * eps.array().square())
      .matrix();
}

FreeEnergy free_energy(const DamageState& state, const Grid1D& grid,
                       const MaterialParams& params, Modulation m) {
  const double h = grid.h();
  FreeEnergy e;
  e.elastic = h * elastic_energy_density(state, grid, params, m).sum();
  const int cells = grid.n_cells();
  const Vector dd = state.d.tail(cells) - state.d.head(cells);
  e.gradient = 0.5 * params.K() / h * dd.squaredNorm();
  e.local = 0.5 * params.L() *
            (grid.node_weights().array() * state.d.array().square()).sum();
  return e;
}

Vector driving_force(const DamageState& state, const Grid1D& grid,
                     const MaterialParams& params, Modulation m) {
  const int n = grid.n_nodes();
  require_size(state.d, n, "driving_force d");
  const double h = grid.h();
  const Vector eps = strain(state.u, grid);
  const Vector w = 0.5 * params.K_e * eps.array().square();
  const Vector& d = state.d;
  Vector g(n);
  for (int i = 0; i < n; ++i) {
    double w_bar;
    double lap;
    if (i == 0) {
      w_bar = w(0);
      lap = 2.0 * (d(1) - d(0)) / (h * h);
    } else if (i == n - 1) {
      w_bar = w(n - 2);
      lap = 2.0 * (d(n - 2) - d(n - 1)) / (h * h);
    } else {
      w_bar = 0.5 * (w(i - 1) + w(i));
      lap = (d(i - 1) - 2.0 * d(i) + d(i + 1)) / (h * h);
    }
    g(i) = params.L() * d(i) + phi_prime(m, d(i)) * w_bar - params.K() * lap;
  }
  return g;
}

Vector internal_force(const Vector& u, const Vector& d, const Grid1D& grid,
                      const MaterialParams& params, Modulation m) {
  const int n = grid.n_nodes();
  require_size(d, n, "internal_force d");
  const Vector sigma =
      (cell_phi(d, m).array() * params.K_e * strain(u, grid).array()).matrix();
  Vector f = Vector::Zero(n);
  for (int c = 0; c < n - 1; ++c) {
    f(c) += sigma(c);
    f(c + 1) -= sigma(c);
  }
  return f;
}

DamageState dynamic_step(const DamageState& state, const Grid1D& grid,
                         const MaterialParams& params, Modulation m,
                         const Loading& loading, double t, double dt) {
  if (!(dt > 0.0)) throw DomainError("dynamic_step: dt must be positive");
  const int n = grid.n_nodes();
  const Vector weights = grid.node_weights();
  const std::vector<bool> free = free_mask(grid, loading);

  DamageState next = state;

  // (i) momentum
  const Vector force = internal_force(state.u, state.d, grid, params, m) +
                       external_force(grid, loading, t);
  for (int i = 0; i < n; ++i) {
    if (free[static_cast<std::size_t>(i)]) next.p(i) += dt * force(i) / weights(i);
  }
  // (ii) displacement, then boundary data at t + dt
  for (int i = 0; i < n; ++i) {
    if (free[static_cast<std::size_t>(i)]) next.u(i) += dt * next.p(i) / params.rho;
  }
  apply_boundary(next.u, loading, t + dt);
  next.p(0) = 0.0;
  if (displacement_controlled(loading)) {
    next.p(n - 1) = params.rho * (next.u(n - 1) - state.u(n - 1)) / dt;
  }
  // (iii) resolvent of -(ẏ + G) ∈ S(y), with G at the updated displacement
  DamageState staged = next;
  const Vector g = driving_force(staged, grid, params, m);
  next.y = (state.y.array() - dt * (g.array() + params.beta)).max(0.0).matrix();
  // (iv) damage, saturating at 1
  next.d = state.d + dt * params.b() * next.y;
  for (int i = 0; i < n; ++i) {
    if (next.d(i) >= 1.0) {
      next.d(i) = 1.0;
      next.y(i) = 0.0;
    }
  }
  if (!all_finite(next)) throw NumericalBlowup("dynamic_step: non-finite field", 0);
  return next;
}

StableDt stable_dt(const Grid1D& grid, const MaterialParams& params,
                   const DamageState& state, Modulation m, double cfl_factor) {
  double phi_max = 0.0;
  for (Eigen::Index i = 0; i < state.d.size(); ++i) {
    phi_max = std::max(phi_max, phi(m, state.d(i)));
  }
  StableDt out;
  out.elastic_speed = std::sqrt(params.K_e * phi_max / params.rho);
  out.damage_speed = params.damage_speed();
  out.dt = cfl_factor * grid.h() / std::max(out.elastic_speed, out.damage_speed);
  return out;
}

void DynamicResult::require_ok() const {
  if (diagnostics.blowup) {
    throw NumericalBlowup("run_dynamic: non-finite state", diagnostics.blowup_step);
  }
}

Vector solve_displacement(const Vector& d, const Grid1D& grid,
                          const MaterialParams& params, Modulation m,
                          const Loading& loading, double t) {
  const int n = grid.n_nodes();
  require_size(d, n, "solve_displacement d");
  const Vector k = (cell_phi(d, m).array().max(kStiffnessFloor) * params.K_e / grid.h())
                       .matrix();
  const Vector f = external_force(grid, loading, t);
  const std::vector<bool> free = free_mask(grid, loading);

  // Tridiagonal rows: lower(i) u_{i-1} + diag(i) u_i + upper(i) u_{i+1} = rhs(i).
  Vector lower = Vector::Zero(n), diag = Vector::Zero(n), upper = Vector::Zero(n);
  Vector rhs = Vector::Zero(n);
  Vector boundary = Vector::Zero(n);
  apply_boundary(boundary, loading, t);
  for (int i = 0; i < n; ++i) {
    if (!free[static_cast<std::size_t>(i)]) {
      diag(i) = 1.0;
      rhs(i) = boundary(i);
      continue;
    }
    if (i > 0) {
      diag(i) += k(i - 1);
      lower(i) = -k(i - 1);
    }
    if (i < n - 1) {
      diag(i) += k(i);
      upper(i) = -k(i);
    }
    rhs(i) = f(i);
  }
  // Thomas algorithm.
  for (int i = 1; i < n; ++i) {
    const double w = lower(i) / diag(i - 1);
    diag(i) -= w * upper(i - 1);
    rhs(i) -= w * rhs(i - 1);
  }
  Vector u(n);
  u(n - 1) = rhs(n - 1) / diag(n - 1);
  for (int i = n - 2; i >= 0; --i) u(i) = (rhs(i) - upper(i) * u(i + 1)) / diag(i);
  return u;
}

DamageState initial_state(const DamageScenario& scenario) {
  const Grid1D& grid = scenario.grid;
  scenario.params.validate();
  DamageState s = DamageState::Zero(grid);
  if (scenario.initial_damage) {
    require_size(*scenario.initial_damage, grid.n_nodes(), "initial damage");
    s.d = scenario.initial_damage->cwiseMax(0.0).cwiseMin(1.0);
  }
  s.u = solve_displacement(s.d, grid, scenario.params, scenario.modulation,
                           scenario.loading, 0.0);
  return s;
}

namespace {

struct LedgerContext {
  const Grid1D& grid;
  const MaterialParams& params;
  Modulation m;
  Vector weights;
  std::vector<bool> free;
  Vector d0;
};

LedgerRow staggered_row(const LedgerContext& ctx, double t, const DamageState& s,
                        const Vector& u_prev) {
  LedgerRow row;
  row.t = t;
  const Vector eps = strain(s.u, ctx.grid);
  const Vector eps_prev = strain(u_prev, ctx.grid);
  row.elastic = ctx.grid.h() * 0.5 * ctx.params.K_e *
                (cell_phi(s.d, ctx.m).array() * eps.array() * eps_prev.array()).sum();
  for (Eigen::Index i = 0; i < s.p.size(); ++i) {
    if (ctx.free[static_cast<std::size_t>(i)]) {
      row.kinetic_u += 0.5 * ctx.weights(i) * s.p(i) * s.p(i) / ctx.params.rho;
    }
  }
  row.kinetic_d =
      0.5 * ctx.params.b() * (ctx.weights.array() * s.y.array().square()).sum();
  const FreeEnergy fe = free_energy(s, ctx.grid, ctx.params, ctx.m);
  row.grad_d = fe.gradient;
  row.local_d = fe.local;
  row.dissipated = ctx.params.beta * ctx.weights.dot(s.d - ctx.d0);
  return row;
}

}  // namespace

DynamicResult run_dynamic(const DamageScenario& scenario) {
  const Grid1D& grid = scenario.grid;
  const MaterialParams& params = scenario.params;
  const Modulation m = scenario.modulation;
  const Loading& loading = scenario.loading;
  if (!(scenario.t_end > 0.0)) throw DomainError("run_dynamic: t_end must be positive");

  DynamicResult result;
  DamageState state = initial_state(scenario);
  const StableDt sdt = stable_dt(grid, params, state, m, scenario.cfl_factor);
  const double requested = scenario.dt.value_or(sdt.dt);
  if (!(requested > 0.0)) throw DomainError("run_dynamic: dt must be positive");
  const auto steps =
      static_cast<std::size_t>(std::ceil(scenario.t_end / requested - 1e-9));
  const double dt = scenario.t_end / static_cast<double>(steps);

  Diagnostics& diag = result.diagnostics;
  diag.dt = dt;
  diag.elastic_speed = sdt.elastic_speed;
  diag.speed_estimate = params.damage_speed();

  const int n = grid.n_nodes();
  const LedgerContext ctx{grid, params, m, grid.node_weights(),
                          free_mask(grid, loading), state.d};
  const bool disp = displacement_controlled(loading);

  // Displacement one step back, consistent with u^0 - u^{-1} = dt p^0 / ρ.
  Vector u_prev = state.u;
  for (int i = 0; i < n; ++i) {
    if (ctx.free[static_cast<std::size_t>(i)]) u_prev(i) -= dt * state.p(i) / params.rho;
  }
  apply_boundary(u_prev, loading, -dt);

  LedgerRow row = staggered_row(ctx, 0.0, state, u_prev);
  const double h0 = row.hamiltonian();
  result.ledger.push_back(row);
  result.snapshots.push_back({0.0, state});
  const int every = std::max(1, scenario.snapshot_every);

  double work = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = dt * static_cast<double>(k);
    DamageState next;
    try {
      next = dynamic_step(state, grid, params, m, loading, t, dt);
    } catch (const NumericalBlowup&) {
      diag.blowup = true;
      diag.blowup_step = k + 1;
      break;
    }
    // Centered external work matching the staggered elastic energy.
    const Vector f_ext = external_force(grid, loading, t);
    for (int i = 0; i < n; ++i) {
      if (ctx.free[static_cast<std::size_t>(i)]) {
        work += 0.5 * f_ext(i) * (next.u(i) - u_prev(i));
      }
    }
    if (disp) {
      const double reaction =
          -internal_force(state.u, state.d, grid, params, m)(n - 1);
      work += 0.5 * reaction * (next.u(n - 1) - u_prev(n - 1));
    }

    ConstraintViolations& v = diag.violations;
    for (int i = 0; i < n; ++i) {
      if (next.d(i) < -kBoxSlack || next.d(i) > 1.0 + kBoxSlack) ++v.damage_out_of_box;
      if (next.d(i) < state.d(i)) ++v.damage_decrease;
      if (next.y(i) < 0.0) ++v.negative_y;
    }
    if (params.beta * ctx.weights.dot(next.d - state.d) < 0.0) ++v.negative_increment;

    u_prev = state.u;
    state = std::move(next);
    const double t_next = (k + 1 == steps) ? scenario.t_end : t + dt;
    row = staggered_row(ctx, t_next, state, u_prev);
    row.work = work;
    row.residual = row.hamiltonian() + row.dissipated - h0 - work;
    diag.max_residual = std::max(diag.max_residual, std::abs(row.residual));
    result.ledger.push_back(row);
    if ((k + 1) % static_cast<std::size_t>(every) == 0 || k + 1 == steps) {
      result.snapshots.push_back({t_next, state});
    }
    diag.steps = k + 1;
  }
  if (diag.blowup) result.snapshots.push_back({result.ledger.back().t, state});
  diag.total_dissipated = result.ledger.back().dissipated;
  diag.front_speed = front_speed(result.snapshots, grid);
  result.final_state = state;
  return result;
}

double band_width(const Vector& d, const Grid1D& grid, double threshold) {
  const double h = grid.h();
  double width = 0.0;
  for (int c = 0; c < grid.n_cells(); ++c) {
    const double a = d(c) - threshold;
    const double b = d(c + 1) - threshold;
    if (a >= 0.0 && b >= 0.0) {
      width += h;
    } else if (a >= 0.0 || b >= 0.0) {
      width += h * std::max(a, b) / std::abs(a - b);
    }
  }
  return width;
}

std::optional<double> front_speed(const std::vector<Snapshot>& snapshots,
                                  const Grid1D& grid, double threshold) {
  // First snapshot reaching the threshold fixes the nucleation site.
  std::size_t first = snapshots.size();
  double x_nuc = 0.0;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    const Vector& d = snapshots[s].state.d;
    Eigen::Index arg = 0;
    if (d.maxCoeff(&arg) >= threshold) {
      first = s;
      x_nuc = grid.x(static_cast<int>(arg));
      break;
    }
  }
  if (first + 1 >= snapshots.size()) return std::nullopt;

  // Front position: farthest extent of {d ≥ threshold} from the nucleation
  // site, with crossings located by linear interpolation.
  auto extent = [&](const Vector& d) {
    const double h = grid.h();
    double reach = 0.0;
    for (int i = 0; i < grid.n_nodes(); ++i) {
      if (d(i) >= threshold) reach = std::max(reach, std::abs(grid.x(i) - x_nuc));
    }
    for (int c = 0; c < grid.n_cells(); ++c) {
      const double a = d(c) - threshold;
      const double b = d(c + 1) - threshold;
      if ((a < 0.0) != (b < 0.0)) {
        const double x = grid.x(c) + h * a / (a - b);
        reach = std::max(reach, std::abs(x - x_nuc));
      }
    }
    return reach;
  };

  std::vector<double> ts;
  std::vector<double> xs;
  for (std::size_t s = first; s < snapshots.size(); ++s) {
    ts.push_back(snapshots[s].t);
    xs.push_back(extent(snapshots[s].state.d));
  }
  // Propagation window: up to the first time the front reaches its final
  // reach; a stationary front uses every damaged snapshot.
  const auto max_it = std::max_element(xs.begin(), xs.end());
  std::size_t last = static_cast<std::size_t>(max_it - xs.begin());
  if (last == 0) last = xs.size() - 1;
  const std::size_t count = last + 1;
  double t_mean = 0.0, x_mean = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    t_mean += ts[i];
    x_mean += xs[i];
  }
  t_mean /= static_cast<double>(count);
  x_mean /= static_cast<double>(count);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    num += (ts[i] - t_mean) * (xs[i] - x_mean);
    den += (ts[i] - t_mean) * (ts[i] - t_mean);
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

ConstraintViolations check_constraints(const std::vector<Snapshot>& snapshots) {
  ConstraintViolations v;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    const DamageState& st = snapshots[s].state;
    for (Eigen::Index i = 0; i < st.d.size(); ++i) {
      if (st.d(i) < -kBoxSlack || st.d(i) > 1.0 + kBoxSlack) ++v.damage_out_of_box;
      if (st.y.size() == st.d.size() && st.y(i) < 0.0) ++v.negative_y;
      if (s > 0 && st.d(i) < snapshots[s - 1].state.d(i)) ++v.damage_decrease;
    }
    if (s > 0 && (st.d - snapshots[s - 1].state.d).sum() < 0.0) ++v.negative_increment;
  }
  return v;
}

// ---- split-system adapter ----------------------------------------------

PhasePoint SplitAdapter::to_phase(const DamageState& s, const Grid1D& grid) const {
  const Vector m = grid.node_weights();
  const auto nf = static_cast<Eigen::Index>(free_nodes.size());
  const Eigen::Index n = grid.n_nodes();
  PhasePoint z;
  z.x.resize(nf + n);
  z.y.resize(nf + n);
  for (Eigen::Index j = 0; j < nf; ++j) {
    const int i = free_nodes[static_cast<std::size_t>(j)];
    z.x(j) = s.u(i);
    z.y(j) = m(i) * s.p(i);
  }
  z.x.tail(n) = s.d;
  z.y.tail(n) = m.cwiseProduct(s.y);
  return z;
}

DamageState SplitAdapter::from_phase(const PhasePoint& z, double t,
                                     const Grid1D& grid,
                                     const Loading& loading) const {
  const Vector m = grid.node_weights();
  const Eigen::Index n = grid.n_nodes();
  DamageState s = DamageState::Zero(grid);
  for (std::size_t j = 0; j < free_nodes.size(); ++j) {
    const int i = free_nodes[j];
    s.u(i) = z.x(static_cast<Eigen::Index>(j));
    s.p(i) = z.y(static_cast<Eigen::Index>(j)) / m(i);
  }
  apply_boundary(s.u, loading, t);
  s.d = z.x.tail(n);
  s.y = z.y.tail(n).cwiseQuotient(m);
  return s;
}

SplitAdapter make_split_system(const Grid1D& grid, const MaterialParams& params,
                               Modulation m, const Loading& loading) {
  params.validate();
  SplitAdapter adapter;
  const std::vector<bool> free = free_mask(grid, loading);
  for (int i = 0; i < grid.n_nodes(); ++i) {
    if (free[static_cast<std::size_t>(i)]) adapter.free_nodes.push_back(i);
  }
  const std::vector<int> nodes = adapter.free_nodes;
  const Vector weights = grid.node_weights();
  const int n = grid.n_nodes();

  auto full_u = [grid, loading, nodes](double t, const Vector& q1) {
    Vector u = Vector::Zero(grid.n_nodes());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      u(nodes[j]) = q1(static_cast<Eigen::Index>(j));
    }
    apply_boundary(u, loading, t);
    return u;
  };

  SplitSystem& sys = adapter.system;
  sys.n1 = static_cast<Eigen::Index>(nodes.size());
  sys.n2 = n;
  sys.energy = [=](double t, const Vector& q1, const Vector& d) {
    DamageState s = DamageState::Zero(grid);
    s.u = full_u(t, q1);
    s.d = d;
    return free_energy(s, grid, params, m).total() -
           external_force(grid, loading, t).dot(s.u);
  };
  sys.energy_grad_q1 = [=](double t, const Vector& q1, const Vector& d) -> Vector {
    const Vector u = full_u(t, q1);
    const Vector g = -internal_force(u, d, grid, params, m) -
                     external_force(grid, loading, t);
    Vector out(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      out(static_cast<Eigen::Index>(j)) = g(nodes[j]);
    }
    return out;
  };
  sys.energy_grad_q2 = [=](double t, const Vector& q1, const Vector& d) -> Vector {
    DamageState s = DamageState::Zero(grid);
    s.u = full_u(t, q1);
    s.d = d;
    return weights.cwiseProduct(driving_force(s, grid, params, m));
  };
  sys.energy_dt = [=](double t, const Vector& q1, const Vector& d) {
    const Vector u = full_u(t, q1);
    double power = -external_force_rate(grid, loading, t).dot(u);
    if (displacement_controlled(loading)) {
      power += -internal_force(u, d, grid, params, m)(n - 1) * loading.rate(t);
    }
    return power;
  };
  Vector free_weights(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    free_weights(static_cast<Eigen::Index>(j)) = weights(nodes[j]);
  }
  const double rho = params.rho;
  sys.kinetic = [free_weights, rho](const Vector& p) {
    return 0.5 * (p.array().square() / (rho * free_weights.array())).sum();
  };
  sys.kinetic_grad = [free_weights, rho](const Vector& p) -> Vector {
    return (p.array() / (rho * free_weights.array())).matrix();
  };
  sys.a_diag = (params.b() / weights.array()).matrix();
  sys.dissipation = DissipationSpec::MakeDamage(params.beta, weights);
  return adapter;
}

// ---- quasistatic --------------------------------------------------------

namespace {

double at_objective(const Vector& u, const Vector& d, const Vector& d_prev,
                    const Grid1D& grid, const MaterialParams& params,
                    Modulation m, const Loading& loading, double t) {
  DamageState s = DamageState::Zero(grid);
  s.u = u;
  s.d = d;
  return free_energy(s, grid, params, m).total() -
         external_force(grid, loading, t).dot(u) +
         params.beta * grid.node_weights().dot(d - d_prev);
}

// Projected Gauss-Seidel on the convex d-subproblem at fixed u.
void relax_damage(const Vector& u, Vector& d, const Vector& d_prev,
                  const Grid1D& grid, const MaterialParams& params,
                  Modulation m) {
  const int n = grid.n_nodes();
  const double h = grid.h();
  const Vector weights = grid.node_weights();
  const Vector eps = strain(u, grid);
  const Vector w = 0.5 * params.K_e * eps.array().square();
  Vector w_bar(n);
  w_bar(0) = w(0);
  w_bar(n - 1) = w(n - 2);
  for (int i = 1; i < n - 1; ++i) w_bar(i) = 0.5 * (w(i - 1) + w(i));
  const double k_over_h = params.K() / h;

  for (int sweep = 0; sweep < 50000; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      double neighbor_sum = 0.0;
      int neighbors = 0;
      if (i > 0) {
        neighbor_sum += d(i - 1);
        ++neighbors;
      }
      if (i < n - 1) {
        neighbor_sum += d(i + 1);
        ++neighbors;
      }
      const double mi = weights(i);
      auto df = [&](double x) {
        return mi * (phi_prime(m, x) * w_bar(i) + params.L() * x + params.beta) +
               k_over_h * (neighbors * x - neighbor_sum);
      };
      auto d2f = [&](double x) {
        return mi * (phi_second(m, x) * w_bar(i) + params.L()) + k_over_h * neighbors;
      };
      const double next = minimize_convex_1d(d_prev(i), d(i), df, d2f);
      change = std::max(change, std::abs(next - d(i)));
      d(i) = next;
    }
    if (change < 1e-14) break;
  }
}

}  // namespace

AltMinResult at_alternate_minimization(const Vector& u, const Vector& d,
                                       const Grid1D& grid,
                                       const MaterialParams& params,
                                       Modulation m, double t,
                                       const Loading& loading,
                                       const Vector& d_prev,
                                       const SolverConfig& cfg) {
  require_size(u, grid.n_nodes(), "at_alternate_minimization u");
  require_size(d_prev, grid.n_nodes(), "at_alternate_minimization d_prev");
  AltMinResult res;
  res.d = d.cwiseMax(d_prev).cwiseMin(1.0);
  res.u = u;
  double previous = kInfinity;
  res.converged = false;
  for (int it = 0; it < cfg.max_outer; ++it) {
    res.iterations = it + 1;
    res.u = solve_displacement(res.d, grid, params, m, loading, t);
    relax_damage(res.u, res.d, d_prev, grid, params, m);
    res.objective = at_objective(res.u, res.d, d_prev, grid, params, m, loading, t);
    if (previous - res.objective < cfg.tol) {
      res.converged = true;
      break;
    }
    previous = res.objective;
  }
  return res;
}

EnergeticProblem make_at_problem(const Grid1D& grid, const MaterialParams& params,
                                 Modulation m, const Loading& loading) {
  params.validate();
  const int n = grid.n_nodes();
  const Vector weights = grid.node_weights();
  EnergeticProblem prob;
  prob.energy = [=](double t, const Vector& q) {
    DamageState s = DamageState::Zero(grid);
    s.u = q.head(n);
    s.d = q.tail(n);
    return free_energy(s, grid, params, m).total() -
           external_force(grid, loading, t).dot(s.u);
  };
  prob.energy_grad = [=](double t, const Vector& q) -> Vector {
    DamageState s = DamageState::Zero(grid);
    s.u = q.head(n);
    s.d = q.tail(n);
    Vector gu = -internal_force(s.u, s.d, grid, params, m) -
                external_force(grid, loading, t);
    gu(0) = 0.0;
    if (displacement_controlled(loading)) gu(n - 1) = 0.0;
    Vector g(2 * n);
    g << gu, weights.cwiseProduct(driving_force(s, grid, params, m));
    return g;
  };
  // Boundary data enter through the linear lift x / L, so transported states
  // shift every node, not only the loaded end.
  Vector lift = Vector::Zero(n);
  if (displacement_controlled(loading)) {
    for (int i = 0; i < n; ++i) lift(i) = grid.x(i) / grid.length();
  }
  prob.energy_dt = [=](double t, const Vector& q) {
    const Vector u = q.head(n);
    const Vector grad_u = -internal_force(u, q.tail(n), grid, params, m) -
                          external_force(grid, loading, t);
    return -external_force_rate(grid, loading, t).dot(u) +
           grad_u.dot(lift) * loading.rate(t);
  };
  prob.transport = [=](double t_from, double t_to, const Vector& q) -> Vector {
    Vector out = q;
    out.head(n) += (loading.value(t_to) - loading.value(t_from)) * lift;
    Vector u = out.head(n);
    apply_boundary(u, loading, t_to);
    out.head(n) = u;
    return out;
  };
  prob.dissipation = DissipationSpec::MakeDamage(params.beta, weights);
  prob.dissipative_offset = n;
  prob.admissible = [=](double t, Vector& q) {
    Vector u = q.head(n);
    apply_boundary(u, loading, t);
    q.head(n) = u;
    q.tail(n) = q.tail(n).cwiseMax(0.0).cwiseMin(1.0);
  };
  prob.minimizer = [=](const Vector& q_prev, double t, const SolverConfig& cfg) {
    const Vector d_prev = q_prev.tail(n);
    const AltMinResult r = at_alternate_minimization(q_prev.head(n), d_prev, grid,
                                                     params, m, t, loading, d_prev, cfg);
    IncrementalResult out;
    out.state.resize(2 * n);
    out.state << r.u, r.d;
    out.objective = r.objective;
    out.iterations = r.iterations;
    out.converged = r.converged;
    return out;
  };
  return prob;
}

std::vector<Vector> standard_competitors(const Vector& q, const Grid1D& grid,
                                         const MaterialParams& params,
                                         Modulation m, const Loading& loading,
                                         double t) {
  const int n = grid.n_nodes();
  const Vector d = q.tail(n);
  std::vector<Vector> out;
  auto push = [&](const Vector& d_hat) {
    Vector c(2 * n);
    c << solve_displacement(d_hat, grid, params, m, loading, t), d_hat;
    out.push_back(std::move(c));
  };
  for (int j = 1; j <= 32; ++j) {
    push((d.array() + j / 32.0).min(1.0).matrix());
  }
  for (const double bump : {0.01, 0.1}) {
    for (int i = 0; i < n; ++i) {
      Vector d_hat = d;
      d_hat(i) = std::min(1.0, d_hat(i) + bump);
      push(d_hat);
    }
  }
  return out;
}

QuasistaticResult run_quasistatic_at(const DamageScenario& scenario,
                                     bool with_stability, const SolverConfig& cfg) {
  const Grid1D& grid = scenario.grid;
  const MaterialParams& params = scenario.params;
  const Modulation m = scenario.modulation;
  const int n = grid.n_nodes();
  if (!(scenario.t_end > 0.0)) {
    throw DomainError("run_quasistatic_at: t_end must be positive");
  }
  const double requested = scenario.dt.value_or(scenario.t_end / 100.0);
  const auto steps =
      static_cast<std::size_t>(std::ceil(scenario.t_end / requested - 1e-9));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    times[k] = scenario.t_end * static_cast<double>(k) / static_cast<double>(steps);
  }

  const DamageState s0 = initial_state(scenario);
  Vector q0(2 * n);
  q0 << s0.u, s0.d;
  const EnergeticProblem prob = make_at_problem(grid, params, m, scenario.loading);

  QuasistaticResult out;
  out.trajectory = run_incremental(prob, q0, times, cfg);
  const std::vector<double> residuals =
      energy_balance_residuals(prob, out.trajectory);
  const Vector weights = grid.node_weights();
  const Vector d0 = out.trajectory.states.front().tail(n);
  double psi0 = 0.0;
  for (std::size_t k = 0; k < out.trajectory.states.size(); ++k) {
    const Vector& q = out.trajectory.states[k];
    DamageState s = DamageState::Zero(grid);
    s.u = q.head(n);
    s.d = q.tail(n);
    const FreeEnergy fe = free_energy(s, grid, params, m);
    LedgerRow row;
    row.t = out.trajectory.times[k];
    row.elastic = fe.elastic;
    row.grad_d = fe.gradient;
    row.local_d = fe.local;
    row.dissipated = out.trajectory.diss_cumulative[k];
    row.residual = residuals[k];
    if (k == 0) psi0 = row.hamiltonian();
    // Work is whatever closes the ledger: ∫∂_t E plus the change of the load
    // potential, so that residual = Ψ + Diss - Ψ_0 - work.
    row.work = row.hamiltonian() + row.dissipated - psi0 - row.residual;
    out.ledger.push_back(row);
    out.max_residual = std::max(out.max_residual, std::abs(row.residual));
    if (with_stability) {
      const double v = check_stability(
          prob, q, row.t,
          standard_competitors(q, grid, params, m, scenario.loading, row.t));
      out.max_stability_violation = std::max(out.max_stability_violation, v);
    }
  }
  return out;
}

}  // namespace dhamsim::damage
