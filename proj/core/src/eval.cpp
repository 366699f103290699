#include "nazr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nazr/error.hpp"

namespace nazr {

std::size_t ConfusionMatrix::row_sum(std::size_t gt) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes; ++p) s += at(gt, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::size_t s = 0;
  for (std::size_t g = 0; g < classes; ++g) s += at(g, pred);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto v : counts) s += v;
  return s;
}

std::vector<std::optional<double>> ConfusionMatrix::row_percentages() const {
  std::vector<std::optional<double>> out(classes * classes);
  for (std::size_t g = 0; g < classes; ++g) {
    const std::size_t rs = row_sum(g);
    if (rs == 0) continue;
    for (std::size_t p = 0; p < classes; ++p) {
      out[g * classes + p] = 100.0 * static_cast<double>(at(g, p)) / rs;
    }
  }
  return out;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes != classes) throw DataError("confusion matrix size mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const int> gt, std::span<const int> pred,
                                 std::size_t classes) {
  if (gt.size() != pred.size()) {
    throw DataError("confusion_matrix: ground truth and predictions differ in length");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0 || pred[i] < 0 || static_cast<std::size_t>(gt[i]) >= classes ||
        static_cast<std::size_t>(pred[i]) >= classes) {
      throw DataError("confusion_matrix: label out of range");
    }
    ++cm.at(gt[i], pred[i]);
  }
  return cm;
}

std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& cm) {
  std::vector<PrecisionRecall> out(cm.classes);
  for (std::size_t c = 0; c < cm.classes; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    if (const auto cs = cm.col_sum(c); cs > 0) out[c].precision = tp / cs;
    if (const auto rs = cm.row_sum(c); rs > 0) out[c].recall = tp / rs;
  }
  return out;
}

PixelAccuracy mean_pixel_accuracy(std::span<const LabelMap> gt,
                                  std::span<const LabelMap> pred) {
  if (gt.size() != pred.size()) {
    throw DataError("mean_pixel_accuracy: list lengths differ");
  }
  std::vector<std::size_t> hit(kNumClasses, 0), tot(kNumClasses, 0);
  std::size_t all_hit = 0, all = 0;
  for (std::size_t m = 0; m < gt.size(); ++m) {
    if (!gt[m].same_grid(pred[m])) {
      throw DataError("mean_pixel_accuracy: label map dimensions differ");
    }
    for (std::size_t i = 0; i < gt[m].labels.size(); ++i) {
      const int g = gt[m].labels[i];
      ++tot[g];
      ++all;
      if (pred[m].labels[i] == g) {
        ++hit[g];
        ++all_hit;
      }
    }
  }
  PixelAccuracy acc;
  acc.per_class.resize(kNumClasses);
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (tot[c] == 0) continue;
    acc.per_class[c] = static_cast<double>(hit[c]) / tot[c];
    if (c > 0) {
      sum += *acc.per_class[c];
      ++defined;
    }
  }
  if (defined > 0) acc.mean_class = sum / defined;
  acc.global = all > 0 ? static_cast<double>(all_hit) / all : 0.0;
  return acc;
}

double hypothesis_product(double x_percent, double y_percent) {
  if (!(x_percent >= 0.0 && x_percent <= 100.0 && y_percent >= 0.0 &&
        y_percent <= 100.0)) {
    throw ConfigError("hypothesis_product expects percentages in [0, 100]");
  }
  return x_percent * y_percent / 100.0;
}

CvReport cv_aggregate(std::span<const double> per_fold) {
  if (per_fold.size() < 2) throw ConfigError("cv_aggregate needs at least two folds");
  CvReport r;
  r.per_fold.assign(per_fold.begin(), per_fold.end());
  // Sorted summation makes the result independent of fold order.
  std::vector<double> sorted = r.per_fold;
  std::sort(sorted.begin(), sorted.end());
  const double k = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  r.mean = sum / k;
  double ss = 0.0;
  for (double v : sorted) ss += (v - r.mean) * (v - r.mean);
  r.std_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  return r;
}

std::optional<CvReport> cv_aggregate_defined(
    std::span<const std::optional<double>> per_fold) {
  std::vector<double> vals;
  for (const auto& v : per_fold)
    if (v) vals.push_back(*v);
  if (vals.size() < 2) return std::nullopt;
  return cv_aggregate(vals);
}

std::string format_value(std::optional<double> v, int precision) {
  if (!v) return "—";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, *v);
  return buf;
}

std::string format_mean_se(const std::optional<CvReport>& r, int precision) {
  if (!r) return "—";
  return format_value(r->mean, precision) + "±" +
         format_value(r->std_error, precision);
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  // Width counts code points so the dash and plus-minus sign align.
  std::size_t cps = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++cps;
  return cps >= width ? s : s + std::string(width - cps, ' ');
}

std::string name_of(std::span<const std::string> names, std::size_t i) {
  return i < names.size() ? names[i] : std::to_string(i);
}

}  // namespace

std::string render_confusion_table(const ConfusionMatrix& cm,
                                   std::span<const std::string> names) {
  const auto pct = cm.row_percentages();
  std::ostringstream out;
  for (std::size_t g = 0; g < cm.classes; ++g) {
    out << pad(name_of(names, g), 12);
    for (std::size_t p = 0; p < cm.classes; ++p) {
      out << " " << pad(format_value(pct[g * cm.classes + p], 0), 5);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_confusion_table(std::span<const ConfusionMatrix> folds,
                                   std::span<const std::string> names) {
  if (folds.empty()) return "";
  const std::size_t c = folds.front().classes;
  std::vector<std::vector<std::optional<double>>> pcts;
  for (const auto& cm : folds) pcts.push_back(cm.row_percentages());
  std::ostringstream out;
  for (std::size_t g = 0; g < c; ++g) {
    out << pad(name_of(names, g), 12);
    for (std::size_t p = 0; p < c; ++p) {
      std::vector<std::optional<double>> cell;
      for (const auto& f : pcts) cell.push_back(f[g * c + p]);
      out << " " << pad(format_mean_se(cv_aggregate_defined(cell), 2), 14);
    }
    out << "\n";
  }
  return out.str();
}

std::string render_precision_recall(std::span<const PrecisionRecall> pr,
                                    std::span<const std::string> names) {
  std::ostringstream out;
  out << pad("Class", 12) << " " << pad("Precision", 10) << " Recall\n";
  for (std::size_t c = 0; c < pr.size(); ++c) {
    out << pad(name_of(names, c), 12) << " " << pad(format_value(pr[c].precision), 10)
        << " " << format_value(pr[c].recall) << "\n";
  }
  return out.str();
}

}  // namespace nazr
