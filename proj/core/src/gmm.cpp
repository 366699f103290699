#include "nazr/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "nazr/kmeans.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

namespace {

constexpr std::uint16_t kGmmVersion = 1;
constexpr std::size_t kBlockRows = 512;

double log_sum_exp(std::span<const double> v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double a : v) mx = std::max(mx, a);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double a : v) s += std::exp(a - mx);
  return mx + std::log(s);
}

}  // namespace

std::vector<double> mixture_weights(std::span<const double> alpha) {
  std::vector<double> w(alpha.size());
  if (alpha.empty()) return w;
  const double mx = *std::max_element(alpha.begin(), alpha.end());
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    w[i] = std::exp(alpha[i] - mx);
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

std::vector<double> GmmModel::weights() const { return mixture_weights(alpha); }

void GmmModel::validate() const {
  if (k == 0 || d == 0) throw ConfigError("GMM must have K >= 1 and D >= 1");
  if (alpha.size() != k || mu.size() != k * d || sigma.size() != k * d) {
    throw ConfigError("GMM parameter arrays do not match K and D");
  }
  for (double a : alpha) {
    if (!std::isfinite(a)) throw NumericError("GMM alpha is not finite");
  }
  for (double m : mu) {
    if (!std::isfinite(m)) throw NumericError("GMM mean is not finite");
  }
  for (double s : sigma) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw NumericError("GMM sigma must be positive and finite");
    }
  }
}

GmmScorer::GmmScorer(const GmmModel& model) : model_(&model) {
  model.validate();
  weights_ = model.weights();
  log_weights_.resize(model.k);
  inv_var_.resize(model.k * model.d);
  log_norm_.resize(model.k);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t j = 0; j < model.k; ++j) {
    log_weights_[j] = std::log(weights_[j]);
    double ln = 0.0;
    for (std::size_t i = 0; i < model.d; ++i) {
      const double s = model.sigma[j * model.d + i];
      inv_var_[j * model.d + i] = 1.0 / (s * s);
      ln += log_2pi + 2.0 * std::log(s);
    }
    log_norm_[j] = -0.5 * ln;
  }
}

void GmmScorer::check_dim(std::size_t n) const {
  if (n != model_->d) {
    throw DataError("vector dimension " + std::to_string(n) +
                    " does not match GMM dimension " +
                    std::to_string(model_->d));
  }
}

double GmmScorer::log_joint(std::size_t j, std::span<const double> x) const {
  const std::size_t d = model_->d;
  const double* mu = model_->mu.data() + j * d;
  const double* iv = inv_var_.data() + j * d;
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = x[i] - mu[i];
    q += diff * diff * iv[i];
  }
  return log_weights_[j] + log_norm_[j] - 0.5 * q;
}

double GmmScorer::posteriors(std::span<const double> x,
                             std::span<double> gamma) const {
  check_dim(x.size());
  const std::size_t k = model_->k;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    gamma[j] = log_joint(j, x);
    mx = std::max(mx, gamma[j]);
  }
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    gamma[j] = std::exp(gamma[j] - mx);
    s += gamma[j];
  }
  for (std::size_t j = 0; j < k; ++j) gamma[j] /= s;
  return mx + std::log(s);
}

double GmmScorer::log_density(std::span<const double> x) const {
  check_dim(x.size());
  std::vector<double> lj(model_->k);
  for (std::size_t j = 0; j < model_->k; ++j) lj[j] = log_joint(j, x);
  return log_sum_exp(lj);
}

double log_density(const GmmModel& m, std::span<const double> x) {
  return GmmScorer(m).log_density(x);
}

std::vector<double> responsibilities(const GmmModel& m,
                                     std::span<const double> x) {
  GmmScorer scorer(m);
  std::vector<double> gamma(m.k);
  scorer.posteriors(x, gamma);
  return gamma;
}

namespace {

// E-step over all rows. Fills gamma (rows x k) and returns the mean
// log-likelihood. Block partial sums are reduced in block order, so the
// result does not depend on the worker count.
double expectation(const GmmScorer& scorer, const Matrix& x, Matrix& gamma) {
  const std::size_t blocks = (x.rows + kBlockRows - 1) / kBlockRows;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(x.rows, (b + 1) * kBlockRows);
    double s = 0.0;
    for (std::size_t i = b * kBlockRows; i < end; ++i) {
      s += scorer.posteriors(x.row(i), gamma.row(i));
    }
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / static_cast<double>(x.rows);
}

}  // namespace

double mean_log_likelihood(const GmmModel& m, const Matrix& x) {
  if (x.cols != m.d) throw DataError("data dimension does not match GMM");
  GmmScorer scorer(m);
  Matrix gamma(x.rows, m.k);
  return expectation(scorer, x, gamma);
}

GmmFit fit_gmm(const Matrix& x, const GmmFitOptions& opts) {
  if (opts.k == 0) throw ConfigError("GMM needs at least one component");
  if (x.rows < opts.k) {
    throw ConfigError("GMM fit needs at least K samples (have " +
                      std::to_string(x.rows) + ", K = " +
                      std::to_string(opts.k) + ")");
  }
  if (opts.variance_floor <= 0.0) throw ConfigError("variance floor must be > 0");
  for (double v : x.data) {
    if (!std::isfinite(v)) throw DataError("GMM training data is not finite");
  }
  const std::size_t n = x.rows, d = x.cols, k = opts.k;
  const double nd = static_cast<double>(n);

  // Global per-dimension variance seeds every component's spread.
  std::vector<double> global_mean(d, 0.0), global_var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) global_mean[c] += x(i, c);
  for (auto& v : global_mean) v /= nd;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = x(i, c) - global_mean[c];
      global_var[c] += diff * diff;
    }
  for (auto& v : global_var) v = std::max(v / nd, opts.variance_floor);

  GmmFit fit;
  GmmModel& m = fit.model;
  m = GmmModel(k, d);
  Rng rng(opts.seed);
  const auto seeds = kmeanspp_seed_indices(x, k, rng);
  for (std::size_t j = 0; j < k; ++j) {
    auto src = x.row(seeds[j]);
    std::copy(src.begin(), src.end(), m.mu.begin() + j * d);
    for (std::size_t c = 0; c < d; ++c) m.sigma[j * d + c] = std::sqrt(global_var[c]);
  }

  Matrix gamma(n, k);
  double prev = 0.0;
  for (int it = 0;; ++it) {
    const GmmModel current = m;
    const GmmScorer scorer(current);
    const double ll = expectation(scorer, x, gamma);
    if (!std::isfinite(ll)) throw NumericError("EM log-likelihood is not finite");
    fit.log_likelihood.push_back(ll);
    fit.iterations = it;
    if (it > 0 && std::abs(ll - prev) <= opts.tol * std::abs(prev)) {
      fit.converged = true;
      break;
    }
    if (it >= opts.max_iters) break;
    prev = ll;

    // M-step, one component per task; sums run over rows in order.
    std::vector<double> mass(k, 0.0);
    std::vector<double> new_w(k, 0.0);
    parallel_for(k, [&](std::size_t j) {
      double s0 = 0.0;
      std::vector<double> s1(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double g = gamma(i, j);
        s0 += g;
        auto r = x.row(i);
        for (std::size_t c = 0; c < d; ++c) s1[c] += g * r[c];
      }
      mass[j] = s0;
      if (s0 <= 0.0) return;
      for (std::size_t c = 0; c < d; ++c) m.mu[j * d + c] = s1[c] / s0;
      std::vector<double> s2(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double g = gamma(i, j);
        auto r = x.row(i);
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = r[c] - m.mu[j * d + c];
          s2[c] += g * diff * diff;
        }
      }
      for (std::size_t c = 0; c < d; ++c) {
        m.sigma[j * d + c] = std::sqrt(std::max(s2[c] / s0, opts.variance_floor));
      }
    });

    // Components that lost all mass restart at the worst-explained point.
    bool reseeded = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (mass[j] > 1e-10 * nd) continue;
      reseeded = true;
      std::size_t worst = 0;
      double worst_ll = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const double l = scorer.log_density(x.row(i));
        if (l < worst_ll) {
          worst_ll = l;
          worst = i;
        }
      }
      auto src = x.row(worst);
      std::copy(src.begin(), src.end(), m.mu.begin() + j * d);
      for (std::size_t c = 0; c < d; ++c) m.sigma[j * d + c] = std::sqrt(global_var[c]);
      mass[j] = 1.0;
    }
    if (reseeded) fit.reseed_iterations.push_back(it);
    double total = 0.0;
    for (double v : mass) total += v;
    for (std::size_t j = 0; j < k; ++j) m.alpha[j] = std::log(mass[j] / total);
  }
  return fit;
}

std::vector<std::uint8_t> encode_gmm(const GmmModel& m, std::uint64_t config_hash) {
  m.validate();
  ByteWriter w;
  w.magic("NZRG");
  w.u16(kGmmVersion);
  w.u32(static_cast<std::uint32_t>(m.k));
  w.u32(static_cast<std::uint32_t>(m.d));
  for (double v : m.alpha) w.f64(v);
  for (double v : m.mu) w.f64(v);
  for (double v : m.sigma) w.f64(v);
  w.u64(config_hash);
  return w.bytes();
}

GmmModel decode_gmm(std::span<const std::uint8_t> bytes,
                    std::uint64_t* config_hash) {
  ByteReader r(bytes);
  r.expect_magic("NZRG");
  if (r.u16() != kGmmVersion) {
    throw FormatError(FormatFault::kBadVersion, "unsupported NZRG version");
  }
  const std::uint32_t k = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint64_t body = checked_payload_bytes(k, 2ULL * d + 1, 8, 1ULL << 34);
  r.require(body + 8, "GMM payload");
  GmmModel m(k, d);
  for (auto& v : m.alpha) v = r.f64();
  for (auto& v : m.mu) v = r.f64();
  for (auto& v : m.sigma) v = r.f64();
  const std::uint64_t hash = r.u64();
  if (config_hash) *config_hash = hash;
  m.validate();
  return m;
}

void write_gmm(const std::filesystem::path& path, const GmmModel& m,
               std::uint64_t config_hash) {
  write_file_bytes(path, encode_gmm(m, config_hash));
}

GmmModel read_gmm(const std::filesystem::path& path, std::uint64_t* config_hash) {
  return decode_gmm(read_file_bytes(path), config_hash);
}

}  // namespace nazr
