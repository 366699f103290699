// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crf_oracle.hpp"
#include "gradient_oracle.hpp"
#include "nazr/crf.hpp"
#include "nazr/descriptors.hpp"
#include "nazr/encoding.hpp"
#include "nazr/eval.hpp"
#include "nazr/gmm.hpp"
#include "nazr/imaging.hpp"
#include "nazr/pipeline.hpp"
#include "nazr/rng.hpp"
#include "nazr/svm.hpp"
#include "nazr/synth.hpp"
#include "nazr/unary.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace nazr::acceptance {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome(const fs::path&)> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

GmmModel random_gmm(std::size_t k, std::size_t d, Rng& rng) {
  GmmModel m(k, d);
  for (auto& a : m.alpha) a = rng.normal(0.0, 0.5);
  for (auto& v : m.mu) v = rng.normal();
  for (auto& v : m.sigma) v = rng.uniform(0.6, 1.8);
  return m;
}

Outcome fv_length(const fs::path&) {
  Rng rng(1);
  const auto m = random_gmm(64, 512, rng);
  const auto x = testing::random_matrix(200, 512, rng);
  const auto fv = fisher_encode(m, x);
  const std::size_t expect = 64 + 2 * 64 * 512;
  return {fv.values.size() == expect && FisherVector::length(64, 512) == expect,
          "length " + std::to_string(fv.values.size())};
}

Outcome gradient_oracle(const fs::path&) {
  Rng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto m = random_gmm(1 + rng.index(4), 1 + rng.index(3), rng);
    const auto x = testing::random_matrix(10 + rng.index(20), m.d, rng, 1.5);
    const auto analytic = pooled_gradients(m, x).values;
    const auto numeric = testing::finite_difference_gradient(m, x);
    worst = std::max(worst, testing::vector_relative_error(numeric, analytic));
  }
  return {worst < 1e-5, "max relative error " + fmt(worst)};
}

Outcome responsibilities_normalized(const fs::path&) {
  Rng rng(5);
  double worst_gamma = 0.0, worst_alpha = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const auto m = random_gmm(1 + rng.index(8), 1 + rng.index(5), rng);
    std::vector<double> x(m.d);
    for (auto& v : x) v = rng.normal(0.0, 3.0);
    const auto g = responsibilities(m, x);
    double s = 0.0;
    for (double v : g) s += v;
    worst_gamma = std::max(worst_gamma, std::abs(s - 1.0));
    const auto grad = fv_gradients(m, x).values;
    double a = 0.0;
    for (std::size_t j = 0; j < m.k; ++j) a += grad[j];
    worst_alpha = std::max(worst_alpha, std::abs(a));
  }
  return {worst_gamma <= 1e-12 && worst_alpha <= 1e-10,
          "max |sum gamma - 1| " + fmt(worst_gamma) + ", max |sum d alpha| " +
              fmt(worst_alpha)};
}

Outcome em_monotone(const fs::path&) {
  Rng rng(17);
  int datasets = 0, violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = std::size_t{1} << (t % 4);
    const std::size_t d = 1 + rng.index(4);
    // Clustered data so that larger K has structure to find.
    const auto centers = testing::random_matrix(k, d, rng, 4.0);
    Matrix x(200 + rng.index(200), d);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto c = rng.index(k);
      for (std::size_t j = 0; j < d; ++j) x(i, j) = centers(c, j) + rng.normal();
    }
    const auto fit = fit_gmm(x, {.k = k, .seed = static_cast<std::uint64_t>(t)});
    ++datasets;
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      const double drop = fit.log_likelihood[i - 1] - fit.log_likelihood[i];
      worst = std::max(worst, drop);
      if (drop > 1e-9) ++violations;
    }
  }
  return {violations == 0, std::to_string(datasets) + " datasets, " +
                               std::to_string(violations) + " decreases, max drop " +
                               fmt(worst)};
}

Outcome crf_oracle(const fs::path&) {
  // Energy: every labeling of every grid up to 2x3 with 2 or 3 classes,
  // several random parameter draws per shape.
  Rng rng(23);
  long labelings = 0, mismatches = 0;
  const std::pair<int, int> shapes[] = {{1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 2},
                                        {2, 3}, {3, 2}};
  for (const auto& [w, h] : shapes) {
    for (int classes = 2; classes <= 3; ++classes) {
      for (int draw = 0; draw < 5; ++draw) {
        auto crf = testing::random_tiny_crf(rng);
        // Reshape the random instance to the requested grid.
        const std::size_t n = static_cast<std::size_t>(w) * h;
        crf.width = w;
        crf.height = h;
        crf.classes = classes;
        crf.unary.resize(n * classes);
        for (auto& g : crf.unary) g = -std::log(std::max(rng.uniform(), 1e-12));
        crf.intensity.resize(n * crf.channels);
        for (auto& v : crf.intensity) v = rng.uniform();
        testing::for_each_labeling(crf, [&](const LabelMap& lm) {
          ++labelings;
          const double a = energy(crf, lm), b = testing::reference_energy(crf, lm);
          if (std::memcmp(&a, &b, sizeof a) != 0) ++mismatches;
        });
      }
    }
  }
  int within = 0;
  for (int t = 0; t < 200; ++t) {
    const auto crf = testing::random_tiny_crf(rng);
    const auto r = mean_field(crf, 100, 1e-6);
    const double e = energy(crf, map_labeling(r.marginals));
    const double best = brute_force_map(crf).energy;
    if (e <= best + 0.05 * std::abs(best)) ++within;
  }
  return {mismatches == 0 && within >= 190,
          std::to_string(labelings) + " labelings, " + std::to_string(mismatches) +
              " energy mismatches; mean-field within 5% of MAP on " +
              std::to_string(within) + "/200 (need 190)"};
}

Outcome hypothesis_arithmetic(const fs::path&) {
  const double a = hypothesis_product(59.04, 83.6);
  const double b = hypothesis_product(63.07, 83.6);
  return {std::abs(a - 49.35) <= 0.1 && std::abs(b - 52.71) <= 0.1,
          fmt(a) + ", " + fmt(b)};
}

Outcome bov_histogram(const fs::path&) {
  // Two visual words at (0,0) and (10,0); six descriptors on a ring around each.
  Matrix blue(12, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / 6.0;
    for (std::size_t w = 0; w < 2; ++w) {
      blue(w * 6 + i, 0) = (w == 0 ? 0.0 : 10.0) + 1.5 * std::cos(a);
      blue(w * 6 + i, 1) = 1.5 * std::sin(a);
    }
  }
  Codebook cb;
  cb.centers = testing::make_matrix(2, 2, {0.0, 0.0, 10.0, 0.0});
  const auto h = bov_encode(cb, blue);
  const auto learned = bov_encode(fit_codebook(blue, 2, 0), blue);
  const std::vector<std::size_t> expect = {6, 6};
  return {h == expect && learned == expect,
          "(" + std::to_string(h[0]) + "," + std::to_string(h[1]) + ")"};
}

// Two textures with the same mean intensity layout but different local
// variation; one texture patch per scene.
struct TextureScene {
  Matrix descs;
  int label = 0;
};

std::vector<TextureScene> two_texture_corpus(std::size_t n, int side, std::uint64_t seed) {
  FilterBankParams params;
  std::vector<TextureScene> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const auto kind = label == 0 ? TextureKind::kMild : TextureKind::kMedium;
    const auto img = texture_patch(kind, side, side, mix_seed(seed, i));
    out.push_back({to_matrix(dense_descriptors(img, params)), label});
  }
  return out;
}

double svm_accuracy(const Matrix& train, const std::vector<int>& train_labels,
                    const Matrix& test, const std::vector<int>& test_labels) {
  SvmOptions opts;
  opts.c = static_cast<double>(train.rows);  // C = 1 on the summed hinge loss
  const auto model = train_ova_svm(train, train_labels, 2, opts).model;
  int correct = 0;
  for (std::size_t i = 0; i < test.rows; ++i)
    if (svm_predict(model, test.row(i)).label == test_labels[i]) ++correct;
  return 100.0 * correct / static_cast<double>(test.rows);
}

struct EncodingComparison {
  double fv = 0.0, bov = 0.0;
};

EncodingComparison compare_encodings(const std::vector<TextureScene>& scenes,
                                     std::size_t k, std::uint64_t seed) {
  const auto folds = make_folds(scenes.size(), 5, seed);
  double fv_sum = 0.0, bov_sum = 0.0;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto train = folds.items_not_in(f), test = folds.items_in(f);
    std::size_t rows = 0;
    const std::size_t d = scenes[0].descs.cols;
    for (auto i : train) rows += scenes[i].descs.rows;
    Matrix pooled(rows, d);
    std::size_t r = 0;
    for (auto i : train) {
      std::copy(scenes[i].descs.data.begin(), scenes[i].descs.data.end(),
                pooled.data.begin() + static_cast<std::ptrdiff_t>(r * d));
      r += scenes[i].descs.rows;
    }
    const auto gmm = fit_gmm(pooled, {.k = k, .seed = mix_seed(seed, 10 + f)}).model;
    const auto cb = fit_codebook(pooled, k, mix_seed(seed, 20 + f));

    const auto encode = [&](const std::vector<std::size_t>& items, Matrix& fv, Matrix& bov,
                            std::vector<int>& labels) {
      fv = Matrix(items.size(), FisherVector::length(k, d));
      bov = Matrix(items.size(), k);
      for (std::size_t n = 0; n < items.size(); ++n) {
        const auto& s = scenes[items[n]];
        const auto v = fisher_encode(gmm, s.descs).values;
        std::copy(v.begin(), v.end(), fv.row(n).begin());
        const auto h = bov_encode(cb, s.descs);
        for (std::size_t j = 0; j < k; ++j)
          bov(n, j) = static_cast<double>(h[j]) / static_cast<double>(s.descs.rows);
        labels.push_back(s.label);
      }
    };
    Matrix fv_tr, bov_tr, fv_te, bov_te;
    std::vector<int> y_tr, y_te;
    encode(train, fv_tr, bov_tr, y_tr);
    encode(test, fv_te, bov_te, y_te);
    fv_sum += svm_accuracy(fv_tr, y_tr, fv_te, y_te);
    bov_sum += svm_accuracy(bov_tr, y_tr, bov_te, y_te);
  }
  return {fv_sum / 5.0, bov_sum / 5.0};
}

Outcome fv_beats_bov(const fs::path&) {
  const auto scenes = two_texture_corpus(200, 24, 8);
  const auto r = compare_encodings(scenes, 4, 8);
  return {r.fv - r.bov >= 5.0,
          "K=4: FV " + fmt(r.fv) + "%, BoV " + fmt(r.bov) + "%"};
}

Outcome end_to_end(const fs::path& work) {
  const auto dir = work / "e2e";
  generate_corpus(50, SceneSpec::noise_free(), 1, dir / "corpus");
  PipelineConfig cfg;
  cfg.manifest = dir / "corpus/manifest.json";
  cfg.model_dir = dir / "models";
  const auto res = run_cv(cfg);
  std::vector<std::optional<double>> combined, hyp;
  for (const auto& f : res.runs.at(0).folds) {
    combined.push_back(f.metrics ? std::optional(f.metrics->combined) : std::nullopt);
    hyp.push_back(f.metrics ? std::optional(f.metrics->hypothesis) : std::nullopt);
  }
  const auto c = cv_aggregate_defined(combined);
  const auto h = cv_aggregate_defined(hyp);
  if (!c || !h) return {false, "fewer than two folds completed"};
  return {c->mean >= 90.0 && c->mean >= h->mean - 2.0,
          "combined " + format_mean_se(c) + ", hypothesis " + format_mean_se(h)};
}

Outcome class_weighting(const fs::path&) {
  Rng rng(3);
  LabeledSamples data{testing::random_matrix(10000, 5, rng), std::vector<int>(10000)};
  for (auto& y : data.labels) y = static_cast<int>(rng.index(4));
  UnaryModel m(4, 5);
  for (auto& w : m.weights) w = rng.normal(0.0, 0.5);
  const std::vector<double> ones(4, 1.0);
  const double a = weighted_loss(m, data, ones), b = cross_entropy(m, data);
  const bool identical = std::memcmp(&a, &b, sizeof a) == 0;
  const double freqs[] = {0.54, 0.22, 0.24};
  const auto w = class_weights(freqs);
  const bool weights_ok = std::abs(w[0] - 0.4444) <= 1e-4 &&
                          std::abs(w[1] - 1.0909) <= 1e-4 && std::abs(w[2] - 1.0) <= 1e-4;
  return {identical && weights_ok,
          std::string(identical ? "bit-identical" : "losses differ") + ", weights (" +
              fmt(w[0]) + ", " + fmt(w[1]) + ", " + fmt(w[2]) + ")"};
}

Outcome determinism(const fs::path& work) {
  const auto dir = work / "determinism";
  SceneSpec spec = SceneSpec::noise_free();
  spec.min_structures = spec.max_structures = 3;
  spec.class_frequencies = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  generate_corpus(6, spec, 2, dir / "corpus");
  PipelineConfig cfg;
  cfg.manifest = dir / "corpus/manifest.json";
  cfg.model_dir = dir / "models";
  cfg.gmm_k = 8;
  cfg.gmm_samples = 4000;
  cfg.unary_epochs = 100;
  cfg.crf_iters = 5;
  cfg.folds = 2;
  const auto a = cv_report_json(cfg, run_cv(cfg));
  const auto b = cv_report_json(cfg, run_cv(cfg));
  return {a == b, std::to_string(a.size()) + " bytes, " +
                      (a == b ? "identical" : "reports differ")};
}

}  // namespace
}  // namespace nazr::acceptance

int main(int argc, char** argv) {
  using namespace nazr::acceptance;
  CLI::App app{"nazr acceptance suite"};
  fs::path workdir = fs::temp_directory_path() / "nazr_acceptance";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for generated corpora");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "fv-dimensionality", 1.0, fv_length},
      {2, "fv-gradient-oracle", 10.0, gradient_oracle},
      {3, "responsibility-normalization", 0.0, responsibilities_normalized},
      {4, "em-monotonicity", 0.0, em_monotone},
      {5, "crf-oracle-equivalence", 60.0, crf_oracle},
      {6, "hypothesis-arithmetic", 0.0, hypothesis_arithmetic},
      {7, "bov-two-word-histogram", 0.0, bov_histogram},
      {8, "fv-beats-bov", 300.0, fv_beats_bov},
      {9, "end-to-end", 600.0, end_to_end},
      {10, "class-weighting", 0.0, class_weighting},
      {11, "cv-determinism", 0.0, determinism},
  };

  fs::remove_all(workdir);
  fs::create_directories(workdir);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(workdir);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over time budget of " + fmt(c.budget_s) + " s";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name
              << ": " << o.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
