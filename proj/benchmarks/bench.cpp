#include <benchmark/benchmark.h>

#include <random>

#include "bdwd/dwd.hpp"
#include "bdwd/laplace.hpp"
#include "bdwd/model.hpp"
#include "bdwd/sampler.hpp"

using namespace bdwd;

namespace {

Dataset make_data(int d, int n, int unlabeled = 0) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  Dataset data;
  data.X.resize(d, n);
  data.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double shift = i % 2 == 0 ? 0.3 : -0.3;
    for (int j = 0; j < d; ++j) data.X(j, i) = z(rng) + shift;
    data.y[static_cast<std::size_t>(i)] = i % 2 == 0 ? Label::positive : Label::negative;
  }
  for (int i = n - unlabeled; i < n; ++i) data.y[static_cast<std::size_t>(i)] = Label::unlabeled;
  return data;
}

void BM_Loss(benchmark::State& state) {
  double u = -3.0, acc = 0.0;
  for (auto _ : state) {
    acc += dwd_loss(u);
    u = u > 3.0 ? -3.0 : u + 0.001;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_Loss);

void BM_Objective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Dataset data = make_data(20, n);
  const ModelState s{Vector::Constant(20, 0.1), 0.05, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(objective(s, data));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Objective)->Arg(100)->Arg(1000)->Arg(10000);

void BM_SolveMode(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Dataset data = make_data(d, 100);
  for (auto _ : state) benchmark::DoNotOptimize(solve_mode(data, 1.0));
}
BENCHMARK(BM_SolveMode)->Arg(20)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_LaplaceFit(benchmark::State& state) {
  const Dataset data = make_data(static_cast<int>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(laplace_fit(data, 1.0));
}
BENCHMARK(BM_LaplaceFit)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

/// Cost of one Metropolis-in-Gibbs cycle (d coordinate steps plus beta0).
void BM_ChainCycle(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  const Dataset data = make_data(d, n, static_cast<int>(state.range(2)));
  const ModelState start = initial_mode(data, 1.0);
  SamplerConfig c;
  c.n_iter = 100;
  c.burn_in = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_chain_from(data, c, {}, nullptr, start));
  state.SetItemsProcessed(state.iterations() * c.n_iter);
}
BENCHMARK(BM_ChainCycle)
    ->Args({20, 100, 0})
    ->Args({100, 100, 0})
    ->Args({100, 1010, 1000})
    ->Unit(benchmark::kMillisecond);

void BM_PhiTable(benchmark::State& state) {
  const Dataset data = make_data(20, static_cast<int>(state.range(0)));
  PhiOptions opt;
  opt.grid_points = 25;
  opt.mc_samples = 500;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_phi_table(data, {}, 0.0, 3, opt));
}
BENCHMARK(BM_PhiTable)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
