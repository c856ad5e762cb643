#include <benchmark/benchmark.h>

#include "dhamsim/damage1d.hpp"
#include "dhamsim/integrators.hpp"

using namespace dhamsim;
using namespace dhamsim::damage;

static void BM_ProxDamage(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const DissipationSpec spec = DissipationSpec::MakeDamage(0.3, Vector::Constant(n, 0.01));
  const Vector w = Vector::LinSpaced(n, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(prox(spec, w, 1e-3));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ProxDamage)->Arg(100)->Arg(10000);

static void BM_StepSplitCoulomb(benchmark::State& state) {
  const SplitSystem sys = CoulombOscillator(1.0, 1.0, 0.1);
  PhasePoint z(Vector::Constant(1, 1.0), Vector::Zero(1));
  double t = 0.0;
  for (auto _ : state) {
    z = step_split(sys, t, z, 1e-4).state;
    t += 1e-4;
  }
  benchmark::DoNotOptimize(z);
}
BENCHMARK(BM_StepSplitCoulomb);

static void BM_DynamicStep(benchmark::State& state) {
  const Grid1D grid(static_cast<int>(state.range(0)), 1.0);
  const MaterialParams params{1.0, 1.0, 0.1, 0.1, 1.0};
  const Loading loading = Loading::Ramp(1.0);
  DamageState s = DamageState::Zero(grid);
  const double dt = stable_dt(grid, params, s).dt;
  double t = 0.0;
  for (auto _ : state) {
    s = dynamic_step(s, grid, params, Modulation::kQuadratic, loading, t, dt);
    t += dt;
  }
  state.SetItemsProcessed(state.iterations() * grid.n_nodes());
}
BENCHMARK(BM_DynamicStep)->Arg(101)->Arg(1001);

static void BM_AlternateMinimization(benchmark::State& state) {
  const Grid1D grid(static_cast<int>(state.range(0)), 1.0);
  const MaterialParams params{1.0, 1.0, 0.1, 0.1, 1.0};
  const Loading loading = Loading::Ramp(1.5);
  const Vector d0 = Vector::Zero(grid.n_nodes());
  const Vector u0 = solve_displacement(d0, grid, params, Modulation::kQuadratic, loading, 0.8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(at_alternate_minimization(u0, d0, grid, params,
                                                       Modulation::kQuadratic, 0.8, loading, d0));
  }
}
BENCHMARK(BM_AlternateMinimization)->Arg(51)->Arg(201);
BENCHMARK_MAIN();
