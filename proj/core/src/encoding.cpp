#include "nazr/encoding.hpp"

#include <cmath>

#include "nazr/binary_io.hpp"
#include "nazr/kmeans.hpp"

namespace nazr {

namespace {

constexpr std::uint16_t kFisherVersion = 1;

// Adds the gradients of one descriptor, scaled by `scale`, into fv.
void accumulate_gradients(const GmmScorer& scorer, std::span<const double> x,
                          std::span<double> gamma, double scale,
                          FisherVector& fv) {
  const GmmModel& m = scorer.model();
  scorer.posteriors(x, gamma);
  const auto& w = scorer.weights();
  for (std::size_t j = 0; j < m.k; ++j) {
    const double g = gamma[j];
    fv.values[j] += scale * (g - w[j]);
    if (g == 0.0) continue;
    for (std::size_t i = 0; i < m.d; ++i) {
      const double s = m.sigma[j * m.d + i];
      const double diff = x[i] - m.mu[j * m.d + i];
      fv.values[fv.mu_index(j, i)] += scale * g * diff / (s * s);
      fv.values[fv.sigma_index(j, i)] +=
          scale * g * (diff * diff / (s * s * s) - 1.0 / s);
    }
  }
}

}  // namespace

FisherVector fv_gradients(const GmmModel& m, std::span<const double> x) {
  GmmScorer scorer(m);
  FisherVector fv(m.k, m.d);
  std::vector<double> gamma(m.k);
  accumulate_gradients(scorer, x, gamma, 1.0, fv);
  return fv;
}

FisherVector pooled_gradients(const GmmModel& m, const Matrix& x) {
  if (x.rows == 0) throw UnencodableSegment();
  if (x.cols != m.d) throw DataError("descriptor dimension does not match GMM");
  GmmScorer scorer(m);
  FisherVector fv(m.k, m.d);
  std::vector<double> gamma(m.k);
  const double scale = 1.0 / static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    accumulate_gradients(scorer, x.row(r), gamma, scale, fv);
  }
  return fv;
}

void normalize_fisher_vector(const GmmModel& m, FisherVector& fv) {
  const auto w = m.weights();
  for (std::size_t j = 0; j < m.k; ++j) {
    fv.values[j] *= FisherScaling::alpha(w[j]);
    for (std::size_t i = 0; i < m.d; ++i) {
      const double s = m.sigma[j * m.d + i];
      fv.values[fv.mu_index(j, i)] *= FisherScaling::mu(w[j], s);
      fv.values[fv.sigma_index(j, i)] *= FisherScaling::sigma(w[j], s);
    }
  }
  double norm2 = 0.0;
  for (double& v : fv.values) {
    v = std::copysign(std::sqrt(std::abs(v)), v);
    norm2 += v * v;
  }
  const double inv = 1.0 / std::max(std::sqrt(norm2), kFvEpsilon);
  for (double& v : fv.values) v *= inv;
}

FisherVector fisher_encode(const GmmModel& m, const Matrix& x) {
  FisherVector fv = pooled_gradients(m, x);
  normalize_fisher_vector(m, fv);
  return fv;
}

FisherVector fisher_encode(const GmmModel& m, const DescriptorSet& ds,
                           const PixelMask* mask) {
  if (ds.dim != m.d) throw DataError("descriptor dimension does not match GMM");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!mask || mask->contains(static_cast<int>(ds.xs[i]),
                                static_cast<int>(ds.ys[i]))) {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw UnencodableSegment();
  Matrix x(keep.size(), ds.dim);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    auto src = ds.row(keep[r]);
    for (std::size_t c = 0; c < ds.dim; ++c) x(r, c) = src[c];
  }
  return fisher_encode(m, x);
}

std::vector<std::uint8_t> encode_fisher_vector(const FisherVector& fv) {
  if (fv.values.size() != FisherVector::length(fv.k, fv.d)) {
    throw DataError("Fisher vector length does not match K and D");
  }
  ByteWriter w;
  w.magic("NZRF");
  w.u16(kFisherVersion);
  w.u32(static_cast<std::uint32_t>(fv.k));
  w.u32(static_cast<std::uint32_t>(fv.d));
  for (double v : fv.values) w.f32(static_cast<float>(v));
  return w.bytes();
}

FisherVector decode_fisher_vector(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("NZRF");
  if (r.u16() != kFisherVersion) {
    throw FormatError(FormatFault::kBadVersion, "unsupported NZRF version");
  }
  const std::uint32_t k = r.u32();
  const std::uint32_t d = r.u32();
  r.require(checked_payload_bytes(k, 2ULL * d + 1, 4, 1ULL << 34), "FV payload");
  FisherVector fv(k, d);
  for (auto& v : fv.values) v = r.f32();
  return fv;
}

void write_fisher_vector(const std::filesystem::path& path, const FisherVector& fv) {
  write_file_bytes(path, encode_fisher_vector(fv));
}

FisherVector read_fisher_vector(const std::filesystem::path& path) {
  return decode_fisher_vector(read_file_bytes(path));
}

Codebook fit_codebook(const Matrix& x, std::size_t k, std::uint64_t seed,
                      int max_iters) {
  if (k == 0 || x.rows < k) {
    throw ConfigError("codebook needs at least K descriptors");
  }
  Rng rng(seed);
  const auto seeds = kmeanspp_seed_indices(x, k, rng);
  Matrix centers(k, x.cols);
  for (std::size_t c = 0; c < k; ++c) {
    auto src = x.row(seeds[c]);
    std::copy(src.begin(), src.end(), centers.row(c).begin());
  }
  LloydResult res = lloyd(x, std::move(centers), max_iters);
  return Codebook{std::move(res.centers), std::move(res.sse_trace)};
}

std::vector<std::size_t> bov_encode(const Codebook& cb, const Matrix& x) {
  std::vector<std::size_t> counts(cb.centers.rows, 0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    ++counts[nearest_center(cb.centers, x.row(i))];
  }
  return counts;
}

}  // namespace nazr
