#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace nazr {

// Deterministic PRNG: mt19937_64 with portable derived distributions. The
// standard <random> distributions are implementation-defined, so everything
// drawn here is computed from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, n), rejection-sampled (no modulo bias). n > 0.
  std::uint64_t index(std::uint64_t n);
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Samples an index proportional to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; derives independent child seeds (per scene, per fold).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nazr
