#include <benchmark/benchmark.h>

#include <cmath>

#include "fblab/elliptic.hpp"
#include "fblab/energy.hpp"
#include "fblab/lattice.hpp"
#include "fblab/solver.hpp"

namespace {

using namespace fblab;

GridFunction saddle_field(double h) {
  Grid g = make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, h);
  return sample(g, FieldRole::Signed, [](const Vec& x) {
    return x[0] * x[0] - x[1] * x[1] + 0.1 * std::sin(5.0 * x[0]);
  });
}

void BM_DirichletEnergy(benchmark::State& state) {
  GridFunction u = saddle_field(1.0 / state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dirichlet_energy(u, unit_ball()));
  }
}
BENCHMARK(BM_DirichletEnergy)->Arg(128)->Arg(256);

void BM_HarmonicReplacement(benchmark::State& state) {
  GridFunction u = saddle_field(1.0 / state.range(0));
  for (auto _ : state) {
    EllipticResult r = harmonic_replacement(u, unit_ball());
    benchmark::DoNotOptimize(r.diag.iterations);
  }
}
BENCHMARK(BM_HarmonicReplacement)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BernoulliSolve(benchmark::State& state) {
  double h = 1.0 / state.range(0);
  Grid g = make_grid({{-1.0, 1.0}, {-1.0, 1.0}}, h);
  GridFunction bd = sample(g, FieldRole::Nonnegative, [](const Vec& x) {
    return std::max(x[1], 0.0);
  });
  SolverConfig cfg;
  cfg.restarts = 1;
  cfg.descent_cap = 100;
  for (auto _ : state) {
    SolveResult r = minimize_bernoulli(bd, unit_ball(), cfg);
    benchmark::DoNotOptimize(r.energy.total);
  }
}
BENCHMARK(BM_BernoulliSolve)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
