#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nazr/matrix.hpp"

namespace nazr {

// Diagonal-covariance Gaussian mixture. Weights are stored through the
// softmax parameters `alpha`; sigma holds standard deviations.
struct GmmModel {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> alpha;  // k
  std::vector<double> mu;     // k * d, component-major
  std::vector<double> sigma;  // k * d

  GmmModel() = default;
  GmmModel(std::size_t components, std::size_t dim)
      : k(components), d(dim), alpha(components, 0.0),
        mu(components * dim, 0.0), sigma(components * dim, 1.0) {}

  std::span<const double> mean(std::size_t j) const { return {mu.data() + j * d, d}; }
  std::span<const double> stddev(std::size_t j) const {
    return {sigma.data() + j * d, d};
  }
  std::vector<double> weights() const;
  // Throws ConfigError on shape mismatch or non-positive sigma.
  void validate() const;
};

// Softmax with max subtraction.
std::vector<double> mixture_weights(std::span<const double> alpha);

// Caches log-weights, inverse variances, and per-component normalisers for
// repeated evaluation against one model.
class GmmScorer {
 public:
  explicit GmmScorer(const GmmModel& model);

  const GmmModel& model() const { return *model_; }
  const std::vector<double>& weights() const { return weights_; }
  // log w_j + log N(x; mu_j, diag sigma_j^2)
  double log_joint(std::size_t j, std::span<const double> x) const;
  // Fills gamma (size k) with posteriors; returns log P(x).
  double posteriors(std::span<const double> x, std::span<double> gamma) const;
  double log_density(std::span<const double> x) const;

 private:
  void check_dim(std::size_t n) const;

  const GmmModel* model_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> inv_var_;
  std::vector<double> log_norm_;  // -0.5 * sum_d log(2 pi sigma^2)
};

double log_density(const GmmModel& m, std::span<const double> x);
std::vector<double> responsibilities(const GmmModel& m,
                                     std::span<const double> x);
// Mean log P(x | model) over the rows of x.
double mean_log_likelihood(const GmmModel& m, const Matrix& x);

struct GmmFitOptions {
  std::size_t k = 64;
  std::uint64_t seed = 0;
  int max_iters = 200;
  double tol = 1e-6;
  double variance_floor = 1e-4;  // lower bound on sigma^2
};

struct GmmFit {
  GmmModel model;
  // Mean log-likelihood of the data under the parameters at the start of each
  // EM iteration; the last entry belongs to the returned model.
  std::vector<double> log_likelihood;
  // Iterations (indices into log_likelihood) whose M-step re-seeded an empty
  // component; monotonicity is not guaranteed across those steps.
  std::vector<int> reseed_iterations;
  int iterations = 0;
  bool converged = false;
};

// EM with k-means++ initialised means. Throws ConfigError when rows < k.
GmmFit fit_gmm(const Matrix& x, const GmmFitOptions& opts);

// "NZRG": magic, u16 version, u32 K, u32 D, alpha, mu, sigma as float64,
// then a u64 config-hash trailer.
std::vector<std::uint8_t> encode_gmm(const GmmModel& m, std::uint64_t config_hash);
GmmModel decode_gmm(std::span<const std::uint8_t> bytes,
                    std::uint64_t* config_hash = nullptr);
void write_gmm(const std::filesystem::path& path, const GmmModel& m,
               std::uint64_t config_hash);
GmmModel read_gmm(const std::filesystem::path& path,
                  std::uint64_t* config_hash = nullptr);

}  // namespace nazr
