#include "nazr/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nazr/error.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

double pairwise_kernel(std::span<const double> a, std::span<const double> b,
                       std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double z = (a[d] - b[d]) / theta[d];
    s += z * z;
  }
  return std::exp(-0.5 * s);
}

namespace {

// Kernel m between pixels i and j without materialising feature vectors.
double kernel_value(const DenseCrf& crf, const CrfKernel& k, std::size_t i,
                    std::size_t j) {
  const double xi = static_cast<double>(i % crf.width);
  const double yi = static_cast<double>(i / crf.width);
  const double xj = static_cast<double>(j % crf.width);
  const double yj = static_cast<double>(j / crf.width);
  double s = 0.0;
  double z = (xi - xj) / k.theta_pos;
  s += z * z;
  z = (yi - yj) / k.theta_pos;
  s += z * z;
  if (k.kind == KernelKind::kBilateral) {
    for (int c = 0; c < crf.channels; ++c) {
      z = (crf.intensity[i * crf.channels + c] -
           crf.intensity[j * crf.channels + c]) / k.theta_int;
      s += z * z;
    }
  }
  return std::exp(-0.5 * s);
}

void check_labeling(const DenseCrf& crf, const LabelMap& labeling) {
  if (labeling.width != crf.width || labeling.height != crf.height) {
    throw DataError("labeling does not match the CRF grid");
  }
  for (auto l : labeling.labels) {
    if (l >= crf.classes) throw DataError("labeling has an out-of-range label");
  }
}

}  // namespace

double DenseCrf::pairwise_weight(std::size_t i, std::size_t j) const {
  double h = 0.0;
  for (const auto& k : kernels) h += k.weight * kernel_value(*this, k, i, j);
  return h;
}

void DenseCrf::validate() const {
  const std::size_t n = pixel_count();
  if (width <= 0 || height <= 0 || classes < 2) {
    throw ConfigError("CRF needs a non-empty grid and at least two classes");
  }
  if (unary.size() != n * classes) throw ConfigError("CRF unary size mismatch");
  if (intensity.size() != n * channels) {
    throw ConfigError("CRF intensity size mismatch");
  }
  if (kernels.empty()) throw ConfigError("CRF needs at least one kernel");
  for (const auto& k : kernels) {
    if (!(k.weight >= 0.0) || !(k.theta_pos > 0.0) ||
        (k.kind == KernelKind::kBilateral && !(k.theta_int > 0.0))) {
      throw ConfigError("CRF kernel weights must be >= 0 and bandwidths > 0");
    }
  }
  for (double g : unary) {
    if (!std::isfinite(g)) throw NumericError("CRF unary is not finite");
  }
}

DenseCrf make_dense_crf(const ProbabilityField& pf, const Image& img,
                        std::vector<CrfKernel> kernels) {
  if (pf.width != img.width || pf.height != img.height) {
    throw DataError("probability field does not match the image");
  }
  DenseCrf crf;
  crf.width = img.width;
  crf.height = img.height;
  crf.classes = pf.classes;
  crf.channels = img.channels;
  crf.intensity.assign(img.data.begin(), img.data.end());
  crf.kernels = std::move(kernels);
  const std::size_t n = pf.pixel_count();
  crf.unary.resize(n * pf.classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < pf.classes; ++c) {
      const double p = std::max(static_cast<double>(pf.at(i, c)), kProbabilityFloor);
      crf.unary[i * pf.classes + c] = -std::log(p);
    }
  }
  crf.validate();
  return crf;
}

EnergyTerms energy_terms(const DenseCrf& crf, const LabelMap& labeling) {
  check_labeling(crf, labeling);
  const std::size_t n = crf.pixel_count();
  EnergyTerms e;
  for (std::size_t i = 0; i < n; ++i) e.unary += crf.g(i, labeling.labels[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labeling.labels[i] != labeling.labels[j]) {
        e.pairwise += crf.pairwise_weight(i, j);
      }
    }
  }
  e.total = e.unary + e.pairwise;
  return e;
}

double energy(const DenseCrf& crf, const LabelMap& labeling) {
  return energy_terms(crf, labeling).total;
}

MapResult brute_force_map(const DenseCrf& crf) {
  crf.validate();
  const std::size_t n = crf.pixel_count();
  const double space = std::pow(static_cast<double>(crf.classes),
                                static_cast<double>(n));
  if (space > static_cast<double>(1u << 20)) {
    throw ConfigError("instance too large for exhaustive MAP");
  }
  // Pairwise weights in the same evaluation order as energy_terms.
  std::vector<double> h(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) h[i * n + j] = crf.pairwise_weight(i, j);

  LabelMap current(crf.width, crf.height, 0);
  MapResult best{current, std::numeric_limits<double>::infinity()};
  const std::size_t total = static_cast<std::size_t>(space);
  for (std::size_t step = 0; step < total; ++step) {
    double unary = 0.0, pairwise = 0.0;
    for (std::size_t i = 0; i < n; ++i) unary += crf.g(i, current.labels[i]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (current.labels[i] != current.labels[j]) pairwise += h[i * n + j];
    const double e = unary + pairwise;
    if (e < best.energy) {
      best.energy = e;
      best.labeling = current;
    }
    // Odometer increment, last pixel fastest: lexicographic order.
    for (std::size_t p = n; p > 0; --p) {
      if (++current.labels[p - 1] < crf.classes) break;
      current.labels[p - 1] = 0;
    }
  }
  return best;
}

MeanFieldResult mean_field(const DenseCrf& crf, int max_iters, double tol) {
  crf.validate();
  const std::size_t n = crf.pixel_count();
  const int c = crf.classes;

  // Dense kernel matrix; the diagonal is zero so sums skip j == i. The
  // positional part of every kernel depends only on |dx|, |dy|, so it is
  // tabulated once; the sums below follow the order used by kernel_value.
  const int w = crf.width, h = crf.height;
  struct KernelTable {
    double weight;
    bool bilateral;
    double theta_int;
    std::vector<double> pos;  // (dy * w + dx) -> zx^2 + zy^2
  };
  std::vector<KernelTable> tables;
  for (const auto& k : crf.kernels) {
    KernelTable t{k.weight, k.kind == KernelKind::kBilateral, k.theta_int,
                  std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int dy = 0; dy < h; ++dy)
      for (int dx = 0; dx < w; ++dx) {
        const double zx = static_cast<double>(dx) / k.theta_pos;
        const double zy = static_cast<double>(dy) / k.theta_pos;
        double s = 0.0;
        s += zx * zx;
        s += zy * zy;
        t.pos[static_cast<std::size_t>(dy) * w + dx] = s;
      }
    tables.push_back(std::move(t));
  }
  for (auto& t : tables) {
    if (t.bilateral) continue;
    for (auto& v : t.pos) v = t.weight * std::exp(-0.5 * v);
  }
  std::vector<float> kmat(n * n, 0.0f);
  parallel_for(n, [&](std::size_t i) {
    const int xi = static_cast<int>(i % w), yi = static_cast<int>(i / w);
    const double* fi = crf.intensity.data() + i * crf.channels;
    float* row = kmat.data() + i * n;
    for (std::size_t j = i + 1; j < n; ++j) {
      const int xj = static_cast<int>(j % w), yj = static_cast<int>(j / w);
      const std::size_t cell =
          static_cast<std::size_t>(std::abs(yi - yj)) * w + std::abs(xi - xj);
      const double* fj = crf.intensity.data() + j * crf.channels;
      double hsum = 0.0;
      for (const auto& t : tables) {
        if (!t.bilateral) {
          hsum += t.pos[cell];
          continue;
        }
        double s = t.pos[cell];
        for (int c = 0; c < crf.channels; ++c) {
          const double z = (fi[c] - fj[c]) / t.theta_int;
          s += z * z;
        }
        hsum += t.weight * std::exp(-0.5 * s);
      }
      row[j] = static_cast<float>(hsum);
    }
  });
  // Mirror the upper triangle in cache-sized tiles.
  constexpr std::size_t kTile = 64;
  for (std::size_t bi = 0; bi < n; bi += kTile)
    for (std::size_t bj = bi; bj < n; bj += kTile)
      for (std::size_t i = bi; i < std::min(n, bi + kTile); ++i)
        for (std::size_t j = std::max(bj, i + 1); j < std::min(n, bj + kTile); ++j)
          kmat[j * n + i] = kmat[i * n + j];
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kmat[i * n + j];
    row_sum[i] = s;
  }

  MeanFieldResult res;
  MarginalField& mf = res.marginals;
  mf.width = crf.width;
  mf.height = crf.height;
  mf.classes = c;
  mf.q.resize(n * c);
  auto normalize_row = [c](const double* logits, double* out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < c; ++k) mx = std::max(mx, logits[k]);
    double z = 0.0;
    for (int k = 0; k < c; ++k) {
      out[k] = std::exp(logits[k] - mx);
      z += out[k];
    }
    for (int k = 0; k < c; ++k) out[k] /= z;
  };
  {
    std::vector<double> logits(c);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < c; ++k) logits[k] = -crf.g(i, k);
      normalize_row(logits.data(), mf.q.data() + i * c);
    }
  }

  std::vector<double> next(n * c);
  std::vector<double> change(n);
  std::vector<double> qt(n * c);
  for (int it = 0; it < max_iters; ++it) {
    // Class-major copy of Q so each message is one contiguous dot product.
    for (std::size_t j = 0; j < n; ++j)
      for (int k = 0; k < c; ++k) qt[k * n + j] = mf.q[j * c + k];
    parallel_for(n, [&](std::size_t i) {
      std::vector<double> acc(c, 0.0);
      const float* krow = kmat.data() + i * n;
      for (int k = 0; k < c; ++k) {
        const double* qk = qt.data() + k * n;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
          s0 += krow[j] * qk[j];
          s1 += krow[j + 1] * qk[j + 1];
          s2 += krow[j + 2] * qk[j + 2];
          s3 += krow[j + 3] * qk[j + 3];
        }
        for (; j < n; ++j) s0 += krow[j] * qk[j];
        acc[k] = (s0 + s1) + (s2 + s3);
      }
      std::vector<double> logits(c);
      for (int k = 0; k < c; ++k) {
        logits[k] = -crf.g(i, k) - (row_sum[i] - acc[k]);
      }
      double* out = next.data() + i * c;
      normalize_row(logits.data(), out);
      double l1 = 0.0;
      for (int k = 0; k < c; ++k) l1 += std::abs(out[k] - mf.q[i * c + k]);
      change[i] = l1;
    });
    mf.q.swap(next);
    res.iterations = it + 1;
    res.last_change = *std::max_element(change.begin(), change.end());
    if (res.last_change < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

LabelMap map_labeling(const MarginalField& q) {
  LabelMap lm(q.width, q.height);
  const std::size_t n = static_cast<std::size_t>(q.width) * q.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = q.q.data() + i * q.classes;
    int best = 0;
    for (int k = 1; k < q.classes; ++k) {
      if (row[k] > row[best]) best = k;
    }
    lm.labels[i] = static_cast<std::uint8_t>(best);
  }
  return lm;
}

}  // namespace nazr
