#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nazr/descriptors.hpp"
#include "nazr/image.hpp"
#include "nazr/matrix.hpp"

namespace nazr {

// Linear softmax over a per-pixel descriptor. Row c of `weights` holds the
// dim coefficients of class c followed by its bias.
struct UnaryModel {
  std::size_t classes = kNumClasses;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes * (dim + 1)

  UnaryModel() = default;
  UnaryModel(std::size_t c, std::size_t d)
      : classes(c), dim(d), weights(c * (d + 1), 0.0) {}

  std::size_t stride() const { return dim + 1; }
  void scores(std::span<const double> x, std::span<double> out) const;
  void probabilities(std::span<const double> x, std::span<double> out) const;
};

using ClassWeights = std::vector<double>;

// Median-frequency balancing: weight_c = median(freqs) / freq_c. The median
// of an even count is the mean of the two middle values. Throws ConfigError
// on a non-positive frequency.
ClassWeights class_weights(std::span<const double> freqs);

struct LabeledSamples {
  Matrix features;
  std::vector<int> labels;
};

// Class-weighted softmax cross-entropy,
//   sum_n cw[y_n] * -log p(y_n | x_n) / sum_n cw[y_n].
double weighted_loss(const UnaryModel& m, const LabeledSamples& data,
                     std::span<const double> cw);
// Analytic gradient of weighted_loss, same layout as UnaryModel::weights.
std::vector<double> weighted_loss_gradient(const UnaryModel& m,
                                           const LabeledSamples& data,
                                           std::span<const double> cw);
// Plain mean cross-entropy (no weights).
double cross_entropy(const UnaryModel& m, const LabeledSamples& data);

struct UnaryTrainOptions {
  std::size_t classes = kNumClasses;
  double learning_rate = 1.0;  // initial step; adapted by backtracking
  int epochs = 300;
  bool standardize = true;  // train on z-scored features, fold back after
};

struct UnaryTrainResult {
  UnaryModel model;
  std::vector<double> loss_trace;  // accepted-iterate losses, non-increasing
};

// Full-batch gradient descent from zero weights with Armijo backtracking.
// Throws DataError when a class has no samples.
UnaryTrainResult train_unary(const LabeledSamples& data,
                             std::span<const double> cw,
                             const UnaryTrainOptions& opts);

// Per-pixel class probabilities, plane-major: data[c * W * H + y * W + x].
struct ProbabilityField {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<float> data;

  ProbabilityField() = default;
  ProbabilityField(int w, int h, int c)
      : width(w), height(h), classes(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(std::size_t pixel, int c) { return data[c * pixel_count() + pixel]; }
  float at(std::size_t pixel, int c) const { return data[c * pixel_count() + pixel]; }
};

ProbabilityField unary_probabilities(const UnaryModel& m, const Image& img,
                                     const FilterBankParams& params);
ProbabilityField unary_probabilities(const UnaryModel& m,
                                     const DescriptorSet& pixel_descs,
                                     int width, int height);

// "NZRP": magic, u32 W, u32 H, u32 C, float32 planes.
std::vector<std::uint8_t> encode_probabilities(const ProbabilityField& pf);
ProbabilityField decode_probabilities(std::span<const std::uint8_t> bytes);
void write_probabilities(const std::filesystem::path& path, const ProbabilityField& pf);
ProbabilityField read_probabilities(const std::filesystem::path& path);

// "NZRU": magic, u16 version, u32 C, u32 D, float64 weights, u64 config hash.
std::vector<std::uint8_t> encode_unary(const UnaryModel& m, std::uint64_t config_hash);
UnaryModel decode_unary(std::span<const std::uint8_t> bytes,
                        std::uint64_t* config_hash = nullptr);
void write_unary(const std::filesystem::path& path, const UnaryModel& m,
                 std::uint64_t config_hash);
UnaryModel read_unary(const std::filesystem::path& path,
                      std::uint64_t* config_hash = nullptr);

}  // namespace nazr
