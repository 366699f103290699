#include "nazr/svm.hpp"

#include <algorithm>
#include <set>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

namespace {

constexpr std::uint16_t kSvmVersion = 1;

double row_score(const double* w, std::size_t dim, std::span<const double> x) {
  double s = w[dim];
  for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
  return s;
}

// Objective and subgradient of one class row in a single pass.
double objective_and_subgradient(const double* w, std::size_t dim, int cls,
                                 const Matrix& x, std::span<const int> labels,
                                 double c, std::vector<double>* grad) {
  double reg = 0.0;
  for (std::size_t d = 0; d < dim; ++d) reg += w[d] * w[d];
  double hinge = 0.0;
  if (grad) {
    grad->assign(dim + 1, 0.0);
    for (std::size_t d = 0; d < dim; ++d) (*grad)[d] = w[d];
  }
  const double scale = c / static_cast<double>(x.rows);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double y = labels[n] == cls ? 1.0 : -1.0;
    const auto xn = x.row(n);
    const double margin = 1.0 - y * row_score(w, dim, xn);
    if (margin <= 0.0) continue;
    hinge += margin;
    if (grad) {
      for (std::size_t d = 0; d < dim; ++d) (*grad)[d] -= scale * y * xn[d];
      (*grad)[dim] -= scale * y;
    }
  }
  return 0.5 * reg + scale * hinge;
}

}  // namespace

double SvmModel::score(std::size_t c, std::span<const double> x) const {
  return row_score(weights.data() + c * stride(), dim, x);
}

double ova_objective(const SvmModel& m, std::size_t cls, const Matrix& x,
                     std::span<const int> labels, double c) {
  return objective_and_subgradient(m.weights.data() + cls * m.stride(), m.dim,
                                   static_cast<int>(cls), x, labels, c, nullptr);
}

std::vector<double> ova_subgradient(const SvmModel& m, std::size_t cls,
                                    const Matrix& x, std::span<const int> labels,
                                    double c) {
  std::vector<double> g;
  objective_and_subgradient(m.weights.data() + cls * m.stride(), m.dim,
                            static_cast<int>(cls), x, labels, c, &g);
  return g;
}

SvmTrainResult train_ova_svm(const Matrix& x, std::span<const int> labels,
                             std::size_t classes, const SvmOptions& opts) {
  if (!(opts.c > 0.0)) throw ConfigError("SVM regularisation C must be > 0");
  if (opts.epochs < 0) throw ConfigError("SVM epochs must be >= 0");
  if (labels.size() != x.rows) throw DataError("SVM label count mismatch");
  std::set<int> present;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("SVM label out of range");
    }
    present.insert(y);
  }
  if (present.size() < 2) {
    throw DataError("SVM training needs at least two classes");
  }

  SvmTrainResult res;
  res.model = SvmModel(classes, x.cols);
  res.initial_objective.assign(classes, 0.0);
  res.final_objective.assign(classes, 0.0);
  const std::size_t dim = x.cols;
  parallel_for(classes, [&](std::size_t cls) {
    std::vector<double> w(dim + 1, 0.0), best = w, g;
    double best_obj = objective_and_subgradient(
        w.data(), dim, static_cast<int>(cls), x, labels, opts.c, &g);
    res.initial_objective[cls] = best_obj;
    for (int t = 1; t <= opts.epochs; ++t) {
      const double step = 1.0 / static_cast<double>(t);
      for (std::size_t d = 0; d <= dim; ++d) w[d] -= step * g[d];
      const double obj = objective_and_subgradient(
          w.data(), dim, static_cast<int>(cls), x, labels, opts.c, &g);
      if (obj < best_obj) {
        best_obj = obj;
        best = w;
      }
    }
    std::copy(best.begin(), best.end(),
              res.model.weights.begin() + cls * res.model.stride());
    res.final_objective[cls] = best_obj;
  });
  return res;
}

int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<int>(c);
  }
  return best;
}

SvmPrediction svm_predict(const SvmModel& m, std::span<const double> x) {
  if (x.size() != m.dim) {
    throw DataError("feature dimension " + std::to_string(x.size()) +
                    " does not match SVM dimension " + std::to_string(m.dim));
  }
  SvmPrediction p;
  p.scores.resize(m.classes);
  for (std::size_t c = 0; c < m.classes; ++c) p.scores[c] = m.score(c, x);
  p.label = argmax_lowest(p.scores);
  return p;
}

std::vector<std::uint8_t> encode_svm(const SvmModel& m, std::uint64_t config_hash) {
  ByteWriter w;
  w.magic("NZRS");
  w.u16(kSvmVersion);
  w.u32(static_cast<std::uint32_t>(m.classes));
  w.u32(static_cast<std::uint32_t>(m.dim));
  for (double v : m.weights) w.f64(v);
  w.u64(config_hash);
  return w.bytes();
}

SvmModel decode_svm(std::span<const std::uint8_t> bytes, std::uint64_t* config_hash) {
  ByteReader r(bytes);
  r.expect_magic("NZRS");
  if (r.u16() != kSvmVersion) {
    throw FormatError(FormatFault::kBadVersion, "unsupported NZRS version");
  }
  const std::uint32_t c = r.u32();
  const std::uint32_t d = r.u32();
  r.require(checked_payload_bytes(c, d + 1ULL, 8, 1ULL << 34) + 8, "SVM weights");
  SvmModel m(c, d);
  for (auto& v : m.weights) v = r.f64();
  const std::uint64_t hash = r.u64();
  if (config_hash) *config_hash = hash;
  return m;
}

void write_svm(const std::filesystem::path& path, const SvmModel& m,
               std::uint64_t config_hash) {
  write_file_bytes(path, encode_svm(m, config_hash));
}

SvmModel read_svm(const std::filesystem::path& path, std::uint64_t* config_hash) {
  return decode_svm(read_file_bytes(path), config_hash);
}

}  // namespace nazr
