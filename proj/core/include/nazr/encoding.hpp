#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nazr/error.hpp"
#include "nazr/gmm.hpp"
#include "nazr/image.hpp"
#include "nazr/matrix.hpp"

namespace nazr {

// Layout: [k alpha entries | k*d mu entries | k*d sigma entries], each block
// component-major.
struct FisherVector {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> values;

  FisherVector() = default;
  FisherVector(std::size_t components, std::size_t dim)
      : k(components), d(dim), values(length(components, dim), 0.0) {}

  static constexpr std::size_t length(std::size_t k, std::size_t d) {
    return k + 2 * k * d;
  }
  std::span<double> alpha_block() { return {values.data(), k}; }
  std::span<const double> alpha_block() const { return {values.data(), k}; }
  std::span<const double> mu_block() const { return {values.data() + k, k * d}; }
  std::span<const double> sigma_block() const {
    return {values.data() + k + k * d, k * d};
  }
  std::size_t mu_index(std::size_t j, std::size_t i) const { return k + j * d + i; }
  std::size_t sigma_index(std::size_t j, std::size_t i) const {
    return k + k * d + j * d + i;
  }
};

// Raised when a segment has no descriptors to pool.
class UnencodableSegment : public DataError {
 public:
  UnencodableSegment() : DataError("segment has no descriptors to encode") {}
};

// Gradients of log P(x | model) for one descriptor:
//   alpha_j:   gamma_j - w_j
//   mu_jd:     gamma_j (x_d - mu_jd) / sigma_jd^2
//   sigma_jd:  gamma_j [(x_d - mu_jd)^2 / sigma_jd^3 - 1 / sigma_jd]
FisherVector fv_gradients(const GmmModel& m, std::span<const double> x);

// Mean of fv_gradients over the rows of x (no normalisation).
FisherVector pooled_gradients(const GmmModel& m, const Matrix& x);

// Diagonal Fisher-information scaling applied to pooled gradients:
//   alpha_j  * 1 / sqrt(w_j)
//   mu_jd    * sigma_jd / sqrt(w_j)
//   sigma_jd * sigma_jd / sqrt(2 w_j)
struct FisherScaling {
  static double alpha(double w) { return 1.0 / std::sqrt(w); }
  static double mu(double w, double sigma) { return sigma / std::sqrt(w); }
  static double sigma(double w, double sigma) { return sigma / std::sqrt(2.0 * w); }
};

inline constexpr double kFvEpsilon = 1e-12;

// Pooled gradients -> Fisher scaling -> signed square root -> L2.
void normalize_fisher_vector(const GmmModel& m, FisherVector& fv);

// Full encoding of a descriptor matrix. Throws UnencodableSegment when x has
// no rows.
FisherVector fisher_encode(const GmmModel& m, const Matrix& x);

// Encodes the descriptors whose centre pixel lies inside `mask` (all of them
// when no mask is given).
FisherVector fisher_encode(const GmmModel& m, const DescriptorSet& ds,
                           const PixelMask* mask = nullptr);

// "NZRF": magic, u16 version, u32 K, u32 D, float32 payload of K + 2KD.
std::vector<std::uint8_t> encode_fisher_vector(const FisherVector& fv);
FisherVector decode_fisher_vector(std::span<const std::uint8_t> bytes);
void write_fisher_vector(const std::filesystem::path& path, const FisherVector& fv);
FisherVector read_fisher_vector(const std::filesystem::path& path);

struct Codebook {
  Matrix centers;                // k x d
  std::vector<double> sse_trace; // within-cluster SSE per Lloyd iteration
};

// k-means++ seeding then Lloyd iterations. Throws ConfigError when rows < k.
Codebook fit_codebook(const Matrix& x, std::size_t k, std::uint64_t seed,
                      int max_iters = 100);

// Histogram of nearest-centre assignments; ties go to the lowest index.
std::vector<std::size_t> bov_encode(const Codebook& cb, const Matrix& x);

}  // namespace nazr
