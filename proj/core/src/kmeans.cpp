#include "nazr/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "nazr/error.hpp"

namespace nazr {

std::vector<std::size_t> kmeanspp_seed_indices(const Matrix& x, std::size_t k,
                                               Rng& rng) {
  if (k == 0 || x.rows < k) {
    throw ConfigError("k-means++ needs at least k rows");
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  chosen.push_back(static_cast<std::size_t>(rng.index(x.rows)));
  std::vector<double> d2(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    d2[i] = squared_distance(x.row(i), x.row(chosen[0]));
  }
  while (chosen.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t next;
    if (total > 0.0) {
      next = rng.categorical(d2);
    } else {
      // Every remaining point coincides with a chosen centre; take the first
      // row not yet chosen.
      next = 0;
      while (std::find(chosen.begin(), chosen.end(), next) != chosen.end()) ++next;
    }
    chosen.push_back(next);
    for (std::size_t i = 0; i < x.rows; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(next)));
    }
    d2[next] = 0.0;
  }
  return chosen;
}

std::size_t nearest_center(const Matrix& centers, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows; ++c) {
    const double d = squared_distance(centers.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

LloydResult lloyd(const Matrix& x, Matrix centers, int max_iters) {
  LloydResult res;
  const std::size_t k = centers.rows;
  res.assignment.assign(x.rows, 0);
  bool first = true;
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const std::size_t c = nearest_center(centers, x.row(i));
      if (first || c != res.assignment[i]) changed = true;
      res.assignment[i] = c;
      sse += squared_distance(centers.row(c), x.row(i));
    }
    first = false;
    res.sse_trace.push_back(sse);
    res.iterations = it + 1;
    if (!changed) break;
    Matrix sums(k, x.cols);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const std::size_t c = res.assignment[i];
      ++counts[c];
      auto s = sums.row(c);
      auto r = x.row(i);
      for (std::size_t j = 0; j < x.cols; ++j) s[j] += r[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto dst = centers.row(c);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < x.cols; ++j) {
        dst[j] = s[j] / static_cast<double>(counts[c]);
      }
    }
  }
  res.centers = std::move(centers);
  return res;
}

}  // namespace nazr
