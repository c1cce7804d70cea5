// Per-iteration cost of message passing against the cell count M and the
// observation dimension d, plus Gamma precomputation and sampling.

#include <benchmark/benchmark.h>

#include <cmath>

#include "ssb/message_passing.hpp"
#include "ssb/posterior.hpp"

using namespace ssb;

namespace {

struct Setup {
  SnapshotSet snapshots;
  LiftedPrior prior;
  WaveletGrid grid;
  std::vector<GammaTensor> gammas;
};

// Matern 3/2 prior; M cells in total, split evenly over d dimensions.
Setup make_setup(int cells, int d, GammaLayout layout, int n = 10, int intervals = 5) {
  Setup s;
  const Dataset data = generate_matern_dataset(KernelSpec::matern(1.5, 1.0, std::vector<double>(d, 1.0)),
                                               TimeGrid::uniform(intervals, 2.0), n, 0);
  s.snapshots = data.snapshots;
  s.prior = build_lifted_prior(KernelSpec::matern(1.5, 1.0, s.snapshots.pooled_std()), s.snapshots.grid);
  const int per_dim = static_cast<int>(std::lround(std::pow(cells, 1.0 / d)));
  s.grid = build_grid(s.prior, {per_dim}, 3.0);
  s.gammas = precompute_gamma(s.prior, s.grid, s.snapshots, layout);
  return s;
}

void run_iterations(benchmark::State& state, GammaLayout layout) {
  const int cells = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const Setup s = make_setup(cells, d, layout);
  const GammaChain chain(s.gammas);
  SolveOptions opts;
  opts.tol = 0.0;
  opts.max_iters = 1;
  for (auto _ : state) {
    state.PauseTiming();
    MessageState st = init_state(s.snapshots, chain.cells());
    state.ResumeTiming();
    solve(st, chain, s.snapshots, opts);
    benchmark::DoNotOptimize(st.log_beta.data());
  }
  state.counters["cells"] = chain.cells();
}

void BM_Iteration(benchmark::State& state) { run_iterations(state, GammaLayout::Factorized); }
void BM_IterationDense(benchmark::State& state) { run_iterations(state, GammaLayout::Dense); }

void BM_PrecomputeGamma(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  Setup s = make_setup(cells, 1, GammaLayout::Factorized);
  for (auto _ : state) benchmark::DoNotOptimize(precompute_gamma(s.prior, s.grid, s.snapshots));
}

void BM_Sample(benchmark::State& state) {
  Setup s = make_setup(64, 1, GammaLayout::Factorized);
  const GammaChain chain(s.gammas);
  MessageState st = init_state(s.snapshots, chain.cells());
  solve(st, chain, s.snapshots);
  const PosteriorChain post(st, s.gammas);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_trajectories(post, s.grid, n, std::nullopt, 1));
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

// M sweep at d = 1, then d = 1, 2, 3 at M = 64
BENCHMARK(BM_Iteration)->ArgsProduct({{16, 32, 64, 128, 256}, {1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Iteration)->Args({64, 2})->Args({64, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IterationDense)->Args({64, 2})->Args({64, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrecomputeGamma)->Arg(16)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sample)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
