#include <benchmark/benchmark.h>

#include "bench_common.hpp"

namespace nazr::bench {
namespace {

void BM_GmmFit(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(1)), 21, 7);
  GmmFitOptions opts;
  opts.k = static_cast<std::size_t>(state.range(0));
  opts.max_iters = 20;
  opts.tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gmm(x, opts));
}
BENCHMARK(BM_GmmFit)->Args({16, 5000})->Args({64, 5000})->Unit(benchmark::kMillisecond);

void BM_Posteriors(benchmark::State& state) {
  const auto gmm = random_gmm(64, 21, 8);
  const GmmScorer scorer(gmm);
  const auto x = random_matrix(1000, 21, 9);
  std::vector<double> gamma(64);
  for (auto _ : state)
    for (std::size_t i = 0; i < x.rows; ++i)
      benchmark::DoNotOptimize(scorer.posteriors(x.row(i), gamma));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows));
}
BENCHMARK(BM_Posteriors)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace nazr::bench
