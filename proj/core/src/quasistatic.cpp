#include "dhamsim/quasistatic.hpp"

#include <algorithm>
#include <cmath>

namespace dhamsim {

namespace {

Eigen::Index block_size(const EnergeticProblem& prob) {
  return prob.dissipation.is_zero() ? 0 : prob.dissipation.dim();
}

double objective(const EnergeticProblem& prob, const Vector& q_prev,
                 const Vector& q, double t) {
  const double d = prob.distance(q_prev, q);
  if (std::isinf(d)) return kInfinity;
  return prob.energy(t, q) + d;
}

// Proximal gradient on E(t, .) + D(q_prev, .) with Armijo-type backtracking
// on the smooth part.
IncrementalResult proximal_gradient(const EnergeticProblem& prob,
                                    const Vector& q_prev, double t,
                                    const SolverConfig& cfg) {
  const Eigen::Index off = prob.dissipative_offset;
  const Eigen::Index nb = block_size(prob);
  auto prox_step = [&](const Vector& q, const Vector& g, double tau) {
    Vector cand = q - tau * g;
    if (nb > 0) {
      const Vector anchor = q_prev.segment(off, nb);
      Vector shifted = prox(prob.dissipation, Vector(cand.segment(off, nb) - anchor), tau);
      cand.segment(off, nb) = anchor + shifted;
      if (prob.dissipation.is_damage()) {
        cand.segment(off, nb) = cand.segment(off, nb).cwiseMin(1.0);
      }
    }
    return prob.project(t, std::move(cand));
  };

  IncrementalResult res;
  res.state = prob.project(t, q_prev);
  res.objective = objective(prob, q_prev, res.state, t);
  double tau = 1.0;
  res.converged = false;
  for (int it = 0; it < cfg.max_outer; ++it) {
    res.iterations = it + 1;
    const Vector g = prob.energy_grad(t, res.state);
    const double e0 = prob.energy(t, res.state);
    Vector cand;
    for (int bt = 0; bt < 60; ++bt) {
      cand = prox_step(res.state, g, tau);
      const Vector delta = cand - res.state;
      const double model = e0 + g.dot(delta) + delta.squaredNorm() / (2.0 * tau);
      if (prob.energy(t, cand) <= model + 1e-15 * std::abs(e0)) break;
      tau *= 0.5;
    }
    const double obj = objective(prob, q_prev, cand, t);
    if (!(obj < res.objective)) {
      res.converged = true;
      break;
    }
    const double decrease = res.objective - obj;
    res.state = std::move(cand);
    res.objective = obj;
    if (decrease < cfg.tol) {
      res.converged = true;
      break;
    }
    tau = std::min(1.0, 2.0 * tau);
  }
  return res;
}

}  // namespace

double EnergeticProblem::distance(const Vector& from, const Vector& to) const {
  if (dissipation.is_zero()) return 0.0;
  const Eigen::Index nb = dissipation.dim();
  return dissipation_distance(dissipation, from.segment(dissipative_offset, nb),
                              to.segment(dissipative_offset, nb));
}

Vector EnergeticProblem::project(double t, Vector q) const {
  if (admissible) admissible(t, q);
  return q;
}

Vector EnergeticProblem::carry(double t_from, double t_to, const Vector& q) const {
  return transport ? transport(t_from, t_to, q) : project(t_to, q);
}

IncrementalResult incremental_step(const EnergeticProblem& prob,
                                   const Vector& q_prev, double t_k,
                                   const SolverConfig& cfg) {
  IncrementalResult res = prob.minimizer ? prob.minimizer(q_prev, t_k, cfg)
                                         : proximal_gradient(prob, q_prev, t_k, cfg);
  const Vector fallback = prob.project(t_k, q_prev);
  const double fallback_obj = objective(prob, q_prev, fallback, t_k);
  res.objective = objective(prob, q_prev, res.state, t_k);
  if (!(res.objective <= fallback_obj)) {
    res.state = fallback;
    res.objective = fallback_obj;
  }
  return res;
}

QuasistaticTrajectory run_incremental(const EnergeticProblem& prob,
                                      const Vector& q0,
                                      const std::vector<double>& times,
                                      const SolverConfig& cfg) {
  QuasistaticTrajectory traj;
  if (times.empty()) return traj;
  Vector q = prob.project(times[0], q0);
  traj.times.push_back(times[0]);
  traj.incremental_values.push_back(prob.energy(times[0], q));
  traj.diss_cumulative.push_back(0.0);
  traj.states.push_back(q);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw DomainError("run_incremental: times must be strictly increasing");
    }
    IncrementalResult step = incremental_step(prob, traj.states.back(), times[k], cfg);
    if (!step.converged) ++traj.convergence_warnings;
    const double d = prob.distance(traj.states.back(), step.state);
    traj.times.push_back(times[k]);
    traj.incremental_values.push_back(step.objective);
    traj.diss_cumulative.push_back(traj.diss_cumulative.back() + d);
    traj.states.push_back(std::move(step.state));
  }
  return traj;
}

double check_stability(const EnergeticProblem& prob, const Vector& q, double t,
                       const std::vector<Vector>& competitors) {
  const double e = prob.energy(t, q);
  double worst = -kInfinity;
  for (const Vector& c : competitors) {
    const double d = prob.distance(q, c);
    if (std::isinf(d)) continue;
    worst = std::max(worst, e - prob.energy(t, c) - d);
  }
  return competitors.empty() ? 0.0 : worst;
}

std::vector<double> energy_balance_residuals(const EnergeticProblem& prob,
                                             const QuasistaticTrajectory& traj) {
  std::vector<double> out(traj.states.size(), 0.0);
  if (traj.states.empty()) return out;
  auto power = [&](double t, const Vector& q) {
    return prob.energy_dt ? prob.energy_dt(t, q) : 0.0;
  };
  const double e0 = prob.energy(traj.times[0], traj.states[0]);
  double work = 0.0;
  double diss = 0.0;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const double t0 = traj.times[k - 1];
    const double t1 = traj.times[k];
    const Vector& q_old = traj.states[k - 1];
    const Vector frozen = prob.carry(t0, t1, q_old);
    work += 0.5 * (t1 - t0) * (power(t0, q_old) + power(t1, frozen));
    diss += prob.distance(q_old, traj.states[k]);
    out[k] = prob.energy(t1, traj.states[k]) + diss - e0 - work;
  }
  return out;
}

double check_energy_balance(const EnergeticProblem& prob,
                            const QuasistaticTrajectory& traj) {
  double worst = 0.0;
  for (double r : energy_balance_residuals(prob, traj)) {
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace dhamsim
