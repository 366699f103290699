#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nazr/crf.hpp"
#include "nazr/rng.hpp"

namespace nazr::testing {

// Energy recomputed from the definition with explicit feature vectors.
inline double reference_energy(const DenseCrf& crf, const LabelMap& lm) {
  const std::size_t n = crf.pixel_count();
  auto features = [&](std::size_t i, const CrfKernel& k, std::vector<double>& f,
                      std::vector<double>& th) {
    f = {static_cast<double>(i % crf.width), static_cast<double>(i / crf.width)};
    th = {k.theta_pos, k.theta_pos};
    if (k.kind == KernelKind::kBilateral) {
      for (int c = 0; c < crf.channels; ++c) {
        f.push_back(crf.intensity[i * crf.channels + c]);
        th.push_back(k.theta_int);
      }
    }
  };
  double unary = 0.0;
  for (std::size_t i = 0; i < n; ++i) unary += crf.unary[i * crf.classes + lm.labels[i]];
  double pairwise = 0.0;
  std::vector<double> fi, fj, th;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (lm.labels[i] == lm.labels[j]) continue;
      double h = 0.0;
      for (const auto& k : crf.kernels) {
        features(i, k, fi, th);
        features(j, k, fj, th);
        h += k.weight * pairwise_kernel(fi, fj, th);
      }
      pairwise += h;
    }
  }
  return unary + pairwise;
}

// Random tiny instance: grid up to 2x3, up to 3 classes, kernel weights in
// (0, max_weight]. Per-pixel probabilities are uniform on the simplex.
inline DenseCrf random_tiny_crf(Rng& rng, double max_weight = 1.0) {
  DenseCrf crf;
  crf.width = 1 + static_cast<int>(rng.index(3));
  crf.height = 1 + static_cast<int>(rng.index(2));
  if (crf.width * crf.height == 1) crf.width = 2;
  crf.classes = 2 + static_cast<int>(rng.index(2));
  crf.channels = 1;
  const std::size_t n = crf.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(crf.classes);
    double s = 0.0;
    for (auto& v : p) s += (v = -std::log1p(-rng.uniform()));
    for (double v : p) crf.unary.push_back(-std::log(std::max(v / s, 1e-12)));
    crf.intensity.push_back(rng.uniform());
  }
  crf.kernels = {
      {max_weight * (1.0 - rng.uniform()), KernelKind::kSpatial, rng.uniform(0.5, 3.0), 0.1},
      {max_weight * (1.0 - rng.uniform()), KernelKind::kBilateral, rng.uniform(0.5, 3.0),
       rng.uniform(0.05, 0.5)}};
  return crf;
}

// Every labeling of the grid, odometer order with the last pixel fastest.
template <class Fn>
void for_each_labeling(const DenseCrf& crf, Fn&& fn) {
  LabelMap lm(crf.width, crf.height, 0);
  while (true) {
    fn(lm);
    std::size_t p = lm.labels.size();
    while (p > 0) {
      --p;
      if (++lm.labels[p] < crf.classes) break;
      lm.labels[p] = 0;
      if (p == 0) return;
    }
  }
}

}  // namespace nazr::testing
