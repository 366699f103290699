#include <benchmark/benchmark.h>

#include "nazr/crf.hpp"
#include "nazr/rng.hpp"
#include "nazr/unary.hpp"

namespace nazr {
namespace {

DenseCrf random_crf(int side, int classes) {
  Rng rng(11);
  ProbabilityField pf(side, side, classes);
  for (std::size_t i = 0; i < pf.data.size(); i += static_cast<std::size_t>(classes)) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c)
      sum += pf.data[i + c] = static_cast<float>(rng.uniform() + 0.01);
    for (int c = 0; c < classes; ++c) pf.data[i + c] = static_cast<float>(pf.data[i + c] / sum);
  }
  Image img(side, side, 1);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return make_dense_crf(pf, img, {{1.0, KernelKind::kSpatial, 3.0, 0.1},
                                  {1.0, KernelKind::kBilateral, 3.0, 0.1}});
}

void BM_MeanField(benchmark::State& state) {
  const auto crf = random_crf(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(mean_field(crf, 10, 0.0));
}
BENCHMARK(BM_MeanField)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ExactEnergy(benchmark::State& state) {
  const auto crf = random_crf(static_cast<int>(state.range(0)), 4);
  LabelMap lm(crf.width, crf.height);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) lm.labels[i] = static_cast<std::uint8_t>(i % 4);
  for (auto _ : state) benchmark::DoNotOptimize(energy(crf, lm));
}
BENCHMARK(BM_ExactEnergy)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace nazr
