#include "nazr/unary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

namespace {

constexpr std::uint16_t kUnaryVersion = 1;
constexpr std::size_t kBlockRows = 4096;

// -log softmax(scores)[label], computed stably.
double sample_nll(std::span<const double> s, int label) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : s) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : s) z += std::exp(v - mx);
  return mx + std::log(z) - s[label];
}

void check_samples(const UnaryModel& m, const LabeledSamples& data,
                   std::span<const double> cw) {
  if (data.features.cols != m.dim) {
    throw DataError("sample dimension does not match unary model");
  }
  if (data.labels.size() != data.features.rows) {
    throw DataError("label count does not match sample count");
  }
  if (cw.size() != m.classes) {
    throw ConfigError("class weight count does not match class count");
  }
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= m.classes) {
      throw DataError("sample label out of range");
    }
  }
}

// Block-wise weighted NLL sum (and optionally the gradient numerator),
// reduced in block order.
double weighted_sums(const UnaryModel& m, const LabeledSamples& data,
                     std::span<const double> cw, std::vector<double>* grad,
                     double* weight_total) {
  const std::size_t n = data.features.rows;
  const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
  std::vector<double> loss(blocks, 0.0), wsum(blocks, 0.0);
  std::vector<std::vector<double>> grads(grad ? blocks : 0);
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<double> s(m.classes), p(m.classes);
    std::vector<double>* g = nullptr;
    if (grad) {
      grads[b].assign(m.weights.size(), 0.0);
      g = &grads[b];
    }
    const std::size_t end = std::min(n, (b + 1) * kBlockRows);
    double l = 0.0, ws = 0.0;
    for (std::size_t i = b * kBlockRows; i < end; ++i) {
      const auto x = data.features.row(i);
      const int y = data.labels[i];
      const double w = cw[y];
      m.scores(x, s);
      l += w * sample_nll(s, y);
      ws += w;
      if (!g) continue;
      m.probabilities(x, p);
      for (std::size_t c = 0; c < m.classes; ++c) {
        const double coef = w * (p[c] - (static_cast<int>(c) == y ? 1.0 : 0.0));
        double* row = g->data() + c * m.stride();
        for (std::size_t d = 0; d < m.dim; ++d) row[d] += coef * x[d];
        row[m.dim] += coef;
      }
    }
    loss[b] = l;
    wsum[b] = ws;
  });
  double total = 0.0, wt = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    total += loss[b];
    wt += wsum[b];
  }
  if (grad) {
    grad->assign(m.weights.size(), 0.0);
    for (const auto& gb : grads)
      for (std::size_t i = 0; i < gb.size(); ++i) (*grad)[i] += gb[i];
  }
  *weight_total = wt;
  return total;
}

}  // namespace

void UnaryModel::scores(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < classes; ++c) {
    const double* w = weights.data() + c * stride();
    double s = w[dim];
    for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
    out[c] = s;
  }
}

void UnaryModel::probabilities(std::span<const double> x,
                               std::span<double> out) const {
  scores(x, out);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, out[c]);
  double z = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    out[c] = std::exp(out[c] - mx);
    z += out[c];
  }
  for (std::size_t c = 0; c < classes; ++c) out[c] /= z;
}

ClassWeights class_weights(std::span<const double> freqs) {
  if (freqs.empty()) throw ConfigError("class_weights needs frequencies");
  for (double f : freqs) {
    if (!(f > 0.0)) throw ConfigError("class frequency must be positive");
  }
  std::vector<double> sorted(freqs.begin(), freqs.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2]
                                   : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  ClassWeights w(n);
  for (std::size_t c = 0; c < n; ++c) w[c] = median / freqs[c];
  return w;
}

double weighted_loss(const UnaryModel& m, const LabeledSamples& data,
                     std::span<const double> cw) {
  check_samples(m, data, cw);
  double wt = 0.0;
  const double total = weighted_sums(m, data, cw, nullptr, &wt);
  return total / wt;
}

std::vector<double> weighted_loss_gradient(const UnaryModel& m,
                                           const LabeledSamples& data,
                                           std::span<const double> cw) {
  check_samples(m, data, cw);
  std::vector<double> g;
  double wt = 0.0;
  weighted_sums(m, data, cw, &g, &wt);
  for (double& v : g) v /= wt;
  return g;
}

double cross_entropy(const UnaryModel& m, const LabeledSamples& data) {
  // Same block reduction as the weighted loss, so unit weights agree exactly.
  const std::vector<double> ones(m.classes, 1.0);
  check_samples(m, data, ones);
  double wt = 0.0;
  const double total = weighted_sums(m, data, ones, nullptr, &wt);
  return total / static_cast<double>(data.features.rows);
}

UnaryTrainResult train_unary(const LabeledSamples& data,
                             std::span<const double> cw,
                             const UnaryTrainOptions& opts) {
  const std::size_t c = opts.classes;
  const std::size_t d = data.features.cols;
  std::vector<std::size_t> counts(c, 0);
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DataError("training label out of range");
    }
    ++counts[y];
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) {
      throw DataError(std::string("training data has no samples of class ") +
                      class_name(static_cast<int>(k)));
    }
  }
  if (opts.epochs < 0 || !(opts.learning_rate > 0.0)) {
    throw ConfigError("unary training needs epochs >= 0 and learning_rate > 0");
  }

  // Train on standardised features; the affine map is folded back below.
  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  LabeledSamples work = data;
  if (opts.standardize && data.features.rows > 0) {
    const double n = static_cast<double>(data.features.rows);
    for (std::size_t i = 0; i < data.features.rows; ++i)
      for (std::size_t k = 0; k < d; ++k) mean[k] += data.features(i, k);
    for (auto& v : mean) v /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < data.features.rows; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = data.features(i, k) - mean[k];
        var[k] += diff * diff;
      }
    for (std::size_t k = 0; k < d; ++k) {
      const double sd = std::sqrt(var[k] / n);
      scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    for (std::size_t i = 0; i < work.features.rows; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        work.features(i, k) = (work.features(i, k) - mean[k]) / scale[k];
      }
  }

  UnaryTrainResult result;
  UnaryModel m(c, d);
  double loss = weighted_loss(m, work, cw);
  result.loss_trace.push_back(loss);
  double step = opts.learning_rate;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto g = weighted_loss_gradient(m, work, cw);
    double g2 = 0.0;
    for (double v : g) g2 += v * v;
    if (g2 < 1e-20) break;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      UnaryModel trial = m;
      for (std::size_t i = 0; i < g.size(); ++i) trial.weights[i] -= step * g[i];
      const double trial_loss = weighted_loss(trial, work, cw);
      if (trial_loss <= loss - 1e-4 * step * g2) {
        m = std::move(trial);
        loss = trial_loss;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    result.loss_trace.push_back(loss);
    step *= 1.5;
  }

  UnaryModel out(c, d);
  for (std::size_t k = 0; k < c; ++k) {
    const double* src = m.weights.data() + k * m.stride();
    double* dst = out.weights.data() + k * out.stride();
    double bias = src[d];
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = src[j] / scale[j];
      bias -= src[j] * mean[j] / scale[j];
    }
    dst[d] = bias;
  }
  result.model = std::move(out);
  return result;
}

ProbabilityField unary_probabilities(const UnaryModel& m,
                                     const DescriptorSet& pixel_descs,
                                     int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (pixel_descs.size() != n || pixel_descs.dim != m.dim) {
    throw DataError("pixel descriptors do not match image or model");
  }
  ProbabilityField pf(width, height, static_cast<int>(m.classes));
  parallel_for(static_cast<std::size_t>(height), [&](std::size_t y) {
    std::vector<double> x(m.dim), p(m.classes);
    for (int xx = 0; xx < width; ++xx) {
      const std::size_t i = y * width + xx;
      auto row = pixel_descs.row(i);
      for (std::size_t d = 0; d < m.dim; ++d) x[d] = row[d];
      m.probabilities(x, p);
      for (std::size_t c = 0; c < m.classes; ++c) {
        pf.at(i, static_cast<int>(c)) = static_cast<float>(p[c]);
      }
    }
  });
  return pf;
}

ProbabilityField unary_probabilities(const UnaryModel& m, const Image& img,
                                     const FilterBankParams& params) {
  return unary_probabilities(m, pixel_descriptors(img, params), img.width,
                             img.height);
}

std::vector<std::uint8_t> encode_probabilities(const ProbabilityField& pf) {
  ByteWriter w;
  w.magic("NZRP");
  w.u32(static_cast<std::uint32_t>(pf.width));
  w.u32(static_cast<std::uint32_t>(pf.height));
  w.u32(static_cast<std::uint32_t>(pf.classes));
  for (float v : pf.data) w.f32(v);
  return w.bytes();
}

ProbabilityField decode_probabilities(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("NZRP");
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t c = r.u32();
  const std::uint64_t pixels = checked_payload_bytes(w, h, 1, 1ULL << 32);
  r.require(checked_payload_bytes(pixels, c, 4, 1ULL << 34), "probability planes");
  if (w == 0 || h == 0 || c == 0) throw DataError("empty probability field");
  ProbabilityField pf(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (auto& v : pf.data) v = r.f32();
  return pf;
}

void write_probabilities(const std::filesystem::path& path, const ProbabilityField& pf) {
  write_file_bytes(path, encode_probabilities(pf));
}

ProbabilityField read_probabilities(const std::filesystem::path& path) {
  return decode_probabilities(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_unary(const UnaryModel& m, std::uint64_t config_hash) {
  ByteWriter w;
  w.magic("NZRU");
  w.u16(kUnaryVersion);
  w.u32(static_cast<std::uint32_t>(m.classes));
  w.u32(static_cast<std::uint32_t>(m.dim));
  for (double v : m.weights) w.f64(v);
  w.u64(config_hash);
  return w.bytes();
}

UnaryModel decode_unary(std::span<const std::uint8_t> bytes,
                        std::uint64_t* config_hash) {
  ByteReader r(bytes);
  r.expect_magic("NZRU");
  if (r.u16() != kUnaryVersion) {
    throw FormatError(FormatFault::kBadVersion, "unsupported NZRU version");
  }
  const std::uint32_t c = r.u32();
  const std::uint32_t d = r.u32();
  r.require(checked_payload_bytes(c, d + 1ULL, 8, 1ULL << 32) + 8, "unary weights");
  UnaryModel m(c, d);
  for (auto& v : m.weights) v = r.f64();
  const std::uint64_t hash = r.u64();
  if (config_hash) *config_hash = hash;
  return m;
}

void write_unary(const std::filesystem::path& path, const UnaryModel& m,
                 std::uint64_t config_hash) {
  write_file_bytes(path, encode_unary(m, config_hash));
}

UnaryModel read_unary(const std::filesystem::path& path, std::uint64_t* config_hash) {
  return decode_unary(read_file_bytes(path), config_hash);
}

}  // namespace nazr
