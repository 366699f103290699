#pragma once

#include "nazr/gmm.hpp"
#include "nazr/matrix.hpp"
#include "nazr/rng.hpp"

namespace nazr::bench {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

inline GmmModel random_gmm(std::size_t k, std::size_t d, std::uint64_t seed) {
  GmmModel m(k, d);
  Rng rng(seed);
  for (auto& a : m.alpha) a = rng.normal();
  for (auto& v : m.mu) v = rng.normal();
  for (auto& s : m.sigma) s = rng.uniform(0.5, 2.0);
  return m;
}

}  // namespace nazr::bench
