#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nazr/matrix.hpp"

namespace nazr {

// One-vs-all linear SVM. Row c of `weights` holds the dim coefficients of
// class c followed by its bias.
struct SvmModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // classes * (dim + 1)

  SvmModel() = default;
  SvmModel(std::size_t c, std::size_t d) : classes(c), dim(d), weights(c * (d + 1), 0.0) {}
  std::size_t stride() const { return dim + 1; }
  double score(std::size_t c, std::span<const double> x) const;
};

struct SvmOptions {
  double c = 1.0;
  int epochs = 300;
};

struct SvmTrainResult {
  SvmModel model;
  std::vector<double> initial_objective;  // per class, at w = 0, b = 0
  std::vector<double> final_objective;    // per class, returned iterate
};

// Binary objective for one class against the rest:
//   1/2 |w|^2 + C * mean_n max(0, 1 - y_n (w . x_n + b)),  y = +1 for `cls`.
double ova_objective(const SvmModel& m, std::size_t cls, const Matrix& x,
                     std::span<const int> labels, double c);
// A subgradient of ova_objective in the same layout as one weight row.
std::vector<double> ova_subgradient(const SvmModel& m, std::size_t cls,
                                    const Matrix& x, std::span<const int> labels,
                                    double c);

// Full-batch subgradient descent per class with step 1/t (the objective is
// 1-strongly convex in w). The lowest-objective iterate is returned, so the
// final objective never exceeds the initial one. Labels must lie in
// [0, classes); throws DataError when fewer than two classes are present.
SvmTrainResult train_ova_svm(const Matrix& x, std::span<const int> labels,
                             std::size_t classes, const SvmOptions& opts);

struct SvmPrediction {
  int label = 0;
  std::vector<double> scores;
};

// Argmax of per-class scores; ties go to the lowest index.
SvmPrediction svm_predict(const SvmModel& m, std::span<const double> x);
int argmax_lowest(std::span<const double> scores);

// "NZRS": magic, u16 version, u32 classes, u32 dim, float64 weights, u64
// config hash.
std::vector<std::uint8_t> encode_svm(const SvmModel& m, std::uint64_t config_hash);
SvmModel decode_svm(std::span<const std::uint8_t> bytes,
                    std::uint64_t* config_hash = nullptr);
void write_svm(const std::filesystem::path& path, const SvmModel& m,
               std::uint64_t config_hash);
SvmModel read_svm(const std::filesystem::path& path,
                  std::uint64_t* config_hash = nullptr);

}  // namespace nazr
