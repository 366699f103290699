#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "nazr/encoding.hpp"

namespace nazr::bench {
namespace {

void BM_FisherEncode(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto gmm = random_gmm(k, 512, 1);
  const auto x = random_matrix(n, 512, 2);
  for (auto _ : state) benchmark::DoNotOptimize(fisher_encode(gmm, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FisherEncode)->Args({64, 100})->Args({64, 1000})->Args({16, 1000})
    ->Unit(benchmark::kMillisecond);

void BM_BovEncode(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto train = random_matrix(2000, 21, 3);
  const auto cb = fit_codebook(train, k, 4);
  const auto x = random_matrix(1000, 21, 5);
  for (auto _ : state) benchmark::DoNotOptimize(bov_encode(cb, x));
}
BENCHMARK(BM_BovEncode)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace nazr::bench
