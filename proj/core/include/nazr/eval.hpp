#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nazr/image.hpp"

namespace nazr {

// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;  // classes * classes

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t c) : classes(c), counts(c * c, 0) {}

  std::size_t& at(std::size_t gt, std::size_t pred) { return counts[gt * classes + pred]; }
  std::size_t at(std::size_t gt, std::size_t pred) const {
    return counts[gt * classes + pred];
  }
  std::size_t row_sum(std::size_t gt) const;
  std::size_t col_sum(std::size_t pred) const;
  std::size_t total() const;
  // Percentages per ground-truth row; rows without samples are undefined.
  std::vector<std::optional<double>> row_percentages() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

// Throws DataError on a length mismatch or a label outside [0, classes).
ConfusionMatrix confusion_matrix(std::span<const int> gt, std::span<const int> pred,
                                 std::size_t classes);

struct PrecisionRecall {
  std::optional<double> precision;  // undefined when nothing was predicted
  std::optional<double> recall;     // undefined when the class is absent in GT
};

std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& cm);

struct PixelAccuracy {
  // Mean over the damage classes present in GT of per-class pixel recall.
  std::optional<double> mean_class;
  // Fraction of all pixels labelled correctly, background included.
  double global = 0.0;
  std::vector<std::optional<double>> per_class;  // recall for classes 0..3
};

// Throws DataError when a pair's grids differ or the list lengths differ.
PixelAccuracy mean_pixel_accuracy(std::span<const LabelMap> gt,
                                  std::span<const LabelMap> pred);

// x * y / 100 for percentages in [0, 100]. Throws ConfigError otherwise.
double hypothesis_product(double x_percent, double y_percent);

struct CvReport {
  std::vector<double> per_fold;
  double mean = 0.0;
  double std_error = 0.0;  // sample std (k - 1) / sqrt(k)
};

// Throws ConfigError with fewer than two folds.
CvReport cv_aggregate(std::span<const double> per_fold);
// Drops undefined entries first; nullopt when fewer than two remain.
std::optional<CvReport> cv_aggregate_defined(
    std::span<const std::optional<double>> per_fold);

// Display helpers. Undefined values render as an em dash.
std::string format_value(std::optional<double> v, int precision = 2);
std::string format_mean_se(const std::optional<CvReport>& r, int precision = 2);

// Row-normalised percentage table, one line per ground-truth class, e.g.
// "Mild 84 13 3".
std::string render_confusion_table(const ConfusionMatrix& cm,
                                   std::span<const std::string> names);
// Same layout with mean±stderr per cell across folds.
std::string render_confusion_table(std::span<const ConfusionMatrix> folds,
                                   std::span<const std::string> names);
std::string render_precision_recall(std::span<const PrecisionRecall> pr,
                                    std::span<const std::string> names);

}  // namespace nazr
