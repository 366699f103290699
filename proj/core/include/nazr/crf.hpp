#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nazr/image.hpp"
#include "nazr/unary.hpp"

namespace nazr {

enum class KernelKind {
  kSpatial,    // f = (x, y) / theta_pos
  kBilateral,  // f = (x / theta_pos, y / theta_pos, I_c / theta_int ...)
};

struct CrfKernel {
  double weight = 1.0;
  KernelKind kind = KernelKind::kSpatial;
  double theta_pos = 3.0;
  double theta_int = 0.1;
};

// exp(-1/2 sum_d (a_d - b_d)^2 / theta_d^2)
double pairwise_kernel(std::span<const double> a, std::span<const double> b,
                       std::span<const double> theta);

// Fully connected CRF over a W x H grid with Potts compatibility:
//   E(x) = sum_i g_i(x_i) + sum_{i<j} [x_i != x_j] sum_m w_m k_m(f_i, f_j).
struct DenseCrf {
  int width = 0;
  int height = 0;
  int classes = 0;
  int channels = 0;
  std::vector<double> unary;      // pixel-major, N * classes, g = -log P
  std::vector<double> intensity;  // pixel-major, N * channels
  std::vector<CrfKernel> kernels;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  double g(std::size_t i, int c) const { return unary[i * classes + c]; }
  // sum_m w_m k_m(f_i, f_j)
  double pairwise_weight(std::size_t i, std::size_t j) const;
  // Throws ConfigError when the structure violates its invariants.
  void validate() const;
};

inline constexpr double kProbabilityFloor = 1e-12;

// Unaries from a probability field (floored at kProbabilityFloor before the
// log) and pixel intensities from the image.
DenseCrf make_dense_crf(const ProbabilityField& pf, const Image& img,
                        std::vector<CrfKernel> kernels);

struct EnergyTerms {
  double unary = 0.0;
  double pairwise = 0.0;
  double total = 0.0;
};

// Exact O(N^2) energy. Unaries are summed in pixel order, pairwise terms over
// i ascending then j > i ascending, and total = unary + pairwise. Throws
// DataError on a grid mismatch or an out-of-range label.
EnergyTerms energy_terms(const DenseCrf& crf, const LabelMap& labeling);
double energy(const DenseCrf& crf, const LabelMap& labeling);

struct MapResult {
  LabelMap labeling;
  double energy = 0.0;
};

// Exhaustive minimiser over all C^N labelings, ties resolved toward the
// lexicographically smallest labeling (pixel 0 most significant). Throws
// ConfigError when C^N > 2^20.
MapResult brute_force_map(const DenseCrf& crf);

// Per-pixel marginals, pixel-major N * classes.
struct MarginalField {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<double> q;

  std::span<const double> at(std::size_t i) const {
    return {q.data() + i * classes, static_cast<std::size_t>(classes)};
  }
};

struct MeanFieldResult {
  MarginalField marginals;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;  // max per-pixel L1 change of the final sweep
};

// Parallel mean-field updates from Q = softmax(-g):
//   Q_i(c) ∝ exp(-g_i(c) - sum_{j != i} K_ij (1 - Q_j(c)))
// with K_ij = sum_m w_m k_m(f_i, f_j) evaluated exactly for every pair. Stops
// when the max per-pixel L1 change drops below tol or after max_iters sweeps.
MeanFieldResult mean_field(const DenseCrf& crf, int max_iters, double tol);

// Per-pixel argmax; ties go to the lowest class index.
LabelMap map_labeling(const MarginalField& q);

}  // namespace nazr
