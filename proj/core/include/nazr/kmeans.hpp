#pragma once

#include <cstddef>
#include <vector>

#include "nazr/matrix.hpp"
#include "nazr/rng.hpp"

namespace nazr {

// k-means++ seeding: row indices of k initial centres. Points already chosen
// have zero weight, so duplicates are only picked once distinct points run
// out.
std::vector<std::size_t> kmeanspp_seed_indices(const Matrix& x, std::size_t k,
                                               Rng& rng);

// Index of the nearest centre (rows of `centers`); ties go to the lowest
// index.
std::size_t nearest_center(const Matrix& centers, std::span<const double> x);

struct LloydResult {
  Matrix centers;
  std::vector<std::size_t> assignment;
  std::vector<double> sse_trace;  // within-cluster SSE after each assignment
  int iterations = 0;
};

// Lloyd iterations from the given centres until assignments stop changing or
// max_iters. An empty cluster keeps its previous centre.
LloydResult lloyd(const Matrix& x, Matrix centers, int max_iters);

}  // namespace nazr
