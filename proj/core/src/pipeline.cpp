#include "nazr/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nazr/binary_io.hpp"
#include "nazr/encoding.hpp"
#include "nazr/error.hpp"
#include "nazr/imaging.hpp"

namespace nazr {

namespace {

using ojson = nlohmann::ordered_json;

const std::array<std::string, kNumClasses> kDisplayNames = {"Background", "Mild",
                                                            "Medium", "Severe"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string number_text(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError("bad value for " + std::string(key) + ": '" +
                      std::string(text) + "'");
  }
  return v;
}

// Rethrows a library error with the stage name prepended, keeping its kind.
template <class Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  }
}

// Sorted sample of `take` indices from [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t take, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (take >= n) return idx;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

double percent(std::size_t hit, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hit) / static_cast<double>(total);
}

std::size_t trace(const ConfusionMatrix& cm) {
  std::size_t s = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) s += cm.at(c, c);
  return s;
}

int encode_and_classify(const TrainedModels& models, const DescriptorSet& dense,
                        const SegmentRecord& seg) {
  const PixelMask mask = seg.mask();
  const auto fv = fisher_encode(models.gmm, dense, &mask);
  return svm_predict(models.svm, fv.values).label;
}

}  // namespace

const char* class_weighting_name(ClassWeighting w) {
  switch (w) {
    case ClassWeighting::kOn: return "on";
    case ClassWeighting::kOff: return "off";
    case ClassWeighting::kBoth: return "both";
  }
  return "on";
}

void PipelineConfig::validate() const {
  descriptors.validate();
  if (gmm_k < 1) throw ConfigError("gmm_k must be >= 1");
  if (gmm_max_iters < 1 || !(gmm_tol >= 0.0)) {
    throw ConfigError("gmm_max_iters must be >= 1 and gmm_tol >= 0");
  }
  if (gmm_samples < gmm_k) throw ConfigError("gmm_samples must be >= gmm_k");
  if (unary_epochs < 0 || unary_samples < 1) {
    throw ConfigError("unary_epochs must be >= 0 and unary_samples >= 1");
  }
  if (crf_iters < 0 || !(crf_tol >= 0.0)) {
    throw ConfigError("crf_iters and crf_tol must be non-negative");
  }
  if (!(theta_pos > 0.0) || !(theta_int > 0.0)) {
    throw ConfigError("theta_pos and theta_int must be positive");
  }
  if (!(w_spatial >= 0.0) || !(w_bilateral >= 0.0)) {
    throw ConfigError("kernel weights must be non-negative");
  }
  if (!(svm_c > 0.0) || svm_epochs < 1) {
    throw ConfigError("svm_c must be positive and svm_epochs >= 1");
  }
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (min_area < 1) throw ConfigError("min_area must be >= 1");
}

std::vector<CrfKernel> PipelineConfig::kernels() const {
  return {{w_spatial, KernelKind::kSpatial, theta_pos, theta_int},
          {w_bilateral, KernelKind::kBilateral, theta_pos, theta_int}};
}

void set_config_value(PipelineConfig& cfg, std::string_view key,
                      std::string_view value) {
  const std::string v = trim(value);
  if (key == "manifest") {
    cfg.manifest = v;
  } else if (key == "model_dir") {
    cfg.model_dir = v;
  } else if (key == "patch_size") {
    cfg.descriptors.patch_size = parse_number<int>(key, v);
  } else if (key == "stride") {
    cfg.descriptors.stride = parse_number<int>(key, v);
  } else if (key == "gmm_k") {
    cfg.gmm_k = parse_number<std::size_t>(key, v);
  } else if (key == "gmm_max_iters") {
    cfg.gmm_max_iters = parse_number<int>(key, v);
  } else if (key == "gmm_tol") {
    cfg.gmm_tol = parse_number<double>(key, v);
  } else if (key == "gmm_samples") {
    cfg.gmm_samples = parse_number<std::size_t>(key, v);
  } else if (key == "unary_epochs") {
    cfg.unary_epochs = parse_number<int>(key, v);
  } else if (key == "unary_samples") {
    cfg.unary_samples = parse_number<std::size_t>(key, v);
  } else if (key == "crf_iters") {
    cfg.crf_iters = parse_number<int>(key, v);
  } else if (key == "crf_tol") {
    cfg.crf_tol = parse_number<double>(key, v);
  } else if (key == "theta_pos") {
    cfg.theta_pos = parse_number<double>(key, v);
  } else if (key == "theta_int") {
    cfg.theta_int = parse_number<double>(key, v);
  } else if (key == "kernel_weights") {
    const auto comma = v.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("kernel_weights expects two values: w1,w2");
    }
    cfg.w_spatial = parse_number<double>(key, trim(std::string_view(v).substr(0, comma)));
    cfg.w_bilateral = parse_number<double>(key, trim(std::string_view(v).substr(comma + 1)));
  } else if (key == "svm_c") {
    cfg.svm_c = parse_number<double>(key, v);
  } else if (key == "svm_epochs") {
    cfg.svm_epochs = parse_number<int>(key, v);
  } else if (key == "class_weighting") {
    if (v == "on") cfg.class_weighting = ClassWeighting::kOn;
    else if (v == "off") cfg.class_weighting = ClassWeighting::kOff;
    else if (v == "both") cfg.class_weighting = ClassWeighting::kBoth;
    else throw ConfigError("class_weighting must be on, off or both");
  } else if (key == "folds") {
    cfg.folds = parse_number<int>(key, v);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "min_area") {
    cfg.min_area = parse_number<int>(key, v);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    set_config_value(cfg, trim(std::string_view(t).substr(0, eq)),
                     std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_config(ss.str());
  // Relative paths in a config file are relative to that file.
  const auto base = path.parent_path();
  if (!cfg.manifest.empty() && cfg.manifest.is_relative()) cfg.manifest = base / cfg.manifest;
  if (cfg.model_dir.is_relative()) cfg.model_dir = base / cfg.model_dir;
  return cfg;
}

namespace {

std::string model_keys_text(const PipelineConfig& c) {
  std::ostringstream out;
  out << "patch_size=" << c.descriptors.patch_size << '\n'
      << "stride=" << c.descriptors.stride << '\n'
      << "gmm_k=" << c.gmm_k << '\n'
      << "gmm_max_iters=" << c.gmm_max_iters << '\n'
      << "gmm_tol=" << number_text(c.gmm_tol) << '\n'
      << "gmm_samples=" << c.gmm_samples << '\n'
      << "unary_epochs=" << c.unary_epochs << '\n'
      << "unary_samples=" << c.unary_samples << '\n'
      << "crf_iters=" << c.crf_iters << '\n'
      << "crf_tol=" << number_text(c.crf_tol) << '\n'
      << "theta_pos=" << number_text(c.theta_pos) << '\n'
      << "theta_int=" << number_text(c.theta_int) << '\n'
      << "kernel_weights=" << number_text(c.w_spatial) << ','
      << number_text(c.w_bilateral) << '\n'
      << "svm_c=" << number_text(c.svm_c) << '\n'
      << "svm_epochs=" << c.svm_epochs << '\n'
      << "class_weighting=" << class_weighting_name(c.class_weighting) << '\n'
      << "seed=" << c.seed << '\n'
      << "min_area=" << c.min_area << '\n';
  return out.str();
}

}  // namespace

std::string config_to_text(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "manifest=" << cfg.manifest.generic_string() << '\n'
      << "model_dir=" << cfg.model_dir.generic_string() << '\n'
      << model_keys_text(cfg) << "folds=" << cfg.folds << '\n';
  return out.str();
}

std::uint64_t model_config_hash(const PipelineConfig& cfg) {
  return fnv1a64(model_keys_text(cfg));
}

IngestResult ingest(const Manifest& manifest, const FilterBankParams& params) {
  IngestResult res;
  for (const auto& entry : manifest.entries) {
    LoadedScene s;
    s.id = entry.image.stem().string();
    s.image = read_pnm(entry.image);
    if (!std::filesystem::exists(entry.annotations)) {
      throw DataError("missing annotation file " + entry.annotations.string());
    }
    const auto ann = read_annotations(entry.annotations);
    auto raster = rasterize_annotations(ann, s.image.width, s.image.height);
    res.skipped_polygons += raster.skipped_polygons;
    if (raster.maps.empty()) {
      throw DataError(entry.annotations.string() + " has no annotators");
    }
    s.gt = majority_vote(raster.maps);
    if (!has_structure(s.gt)) {
      ++res.dropped_empty;
      continue;
    }
    s.pixel_descs = pixel_descriptors(s.image, params);
    s.dense_descs = dense_descriptors(s.image, params);
    res.scenes.push_back(std::move(s));
  }
  return res;
}

LabelMap pixel_stage(const UnaryModel& unary, const PipelineConfig& cfg,
                     const Image& img, const DescriptorSet& pixel_descs) {
  const auto pf = unary_probabilities(unary, pixel_descs, img.width, img.height);
  const auto crf = make_dense_crf(pf, img, cfg.kernels());
  const auto mf = mean_field(crf, cfg.crf_iters, cfg.crf_tol);
  return map_labeling(mf.marginals);
}

TrainedModels train_models(const PipelineConfig& cfg,
                           const std::vector<const LoadedScene*>& scenes,
                           bool weighted, std::ostream* log) {
  cfg.validate();
  if (scenes.empty()) throw DataError("no training scenes");
  TrainedModels out;
  const std::size_t dim = FilterBankParams::kDim;

  in_stage("unary", [&] {
    std::array<double, kNumClasses> counts{};
    double total = 0.0;
    for (const auto* s : scenes) {
      for (auto l : s->gt.labels) counts[l] += 1.0;
      total += static_cast<double>(s->gt.pixel_count());
    }
    for (int c = 0; c < kNumClasses; ++c) {
      if (counts[c] == 0.0) {
        throw DataError(std::string("training scenes have no ") + class_name(c) +
                        " pixels");
      }
    }
    std::vector<double> cw(kNumClasses, 1.0);
    if (weighted) {
      std::array<double, kNumClasses> freqs{};
      for (int c = 0; c < kNumClasses; ++c) freqs[c] = counts[c] / total;
      cw = class_weights(freqs);
    }
    const std::size_t per_scene = std::max<std::size_t>(1, cfg.unary_samples / scenes.size());
    std::vector<std::vector<std::size_t>> picks(scenes.size());
    std::size_t rows = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      Rng rng(mix_seed(mix_seed(cfg.seed, 1), i));
      picks[i] = sample_indices(scenes[i]->pixel_descs.size(), per_scene, rng);
      rows += picks[i].size();
    }
    LabeledSamples data{Matrix(rows, dim), std::vector<int>(rows)};
    std::size_t r = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto& ds = scenes[i]->pixel_descs;
      for (std::size_t p : picks[i]) {
        const auto v = ds.row(p);
        for (std::size_t d = 0; d < dim; ++d) data.features(r, d) = v[d];
        data.labels[r] = scenes[i]->gt.at(static_cast<int>(ds.xs[p]), static_cast<int>(ds.ys[p]));
        ++r;
      }
    }
    UnaryTrainOptions opts;
    opts.epochs = cfg.unary_epochs;
    auto res = train_unary(data, cw, opts);
    log_line(log, "unary: " + std::to_string(rows) + " pixels, loss " +
                      number_text(res.loss_trace.front()) + " -> " +
                      number_text(res.loss_trace.back()));
    out.unary = std::move(res.model);
  });

  in_stage("gmm", [&] {
    std::size_t total = 0;
    for (const auto* s : scenes) total += s->dense_descs.size();
    Rng rng(mix_seed(cfg.seed, 2));
    const auto pick = sample_indices(total, cfg.gmm_samples, rng);
    Matrix x(pick.size(), dim);
    std::size_t scene = 0, offset = 0;
    for (std::size_t r = 0; r < pick.size(); ++r) {
      while (pick[r] >= offset + scenes[scene]->dense_descs.size()) {
        offset += scenes[scene]->dense_descs.size();
        ++scene;
      }
      const auto v = scenes[scene]->dense_descs.row(pick[r] - offset);
      for (std::size_t d = 0; d < dim; ++d) x(r, d) = v[d];
    }
    GmmFitOptions opts;
    opts.k = cfg.gmm_k;
    opts.seed = mix_seed(cfg.seed, 3);
    opts.max_iters = cfg.gmm_max_iters;
    opts.tol = cfg.gmm_tol;
    auto fit = fit_gmm(x, opts);
    log_line(log, "gmm: K=" + std::to_string(cfg.gmm_k) + ", " +
                      std::to_string(x.rows) + " descriptors, " +
                      std::to_string(fit.iterations) + " iterations, mean loglik " +
                      number_text(fit.log_likelihood.back()));
    out.gmm = std::move(fit.model);
  });

  // Pixel stage on the training scenes, then one FV per predicted segment
  // labelled by its maximum-overlap ground-truth class.
  std::vector<std::vector<double>> fvs;
  std::vector<int> labels;
  in_stage("segments", [&] {
    std::vector<std::vector<SegmentRecord>> segs(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto* s = scenes[i];
      const auto lm = pixel_stage(out.unary, cfg, s->image, s->pixel_descs);
      segs[i] = extract_segments(lm, cfg.min_area);
    }
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (const auto& seg : segs[i]) {
        const PixelMask mask = seg.mask();
        try {
          fvs.push_back(fisher_encode(out.gmm, scenes[i]->dense_descs, &mask).values);
        } catch (const UnencodableSegment&) {
          continue;
        }
        labels.push_back(assign_gt_label(seg, scenes[i]->gt));
      }
    }
    log_line(log, "segments: " + std::to_string(fvs.size()) + " encoded");
  });

  in_stage("svm", [&] {
    if (fvs.empty()) throw DataError("no encodable training segments");
    Matrix x(fvs.size(), fvs.front().size());
    for (std::size_t i = 0; i < fvs.size(); ++i)
      std::copy(fvs[i].begin(), fvs[i].end(), x.data.begin() + i * x.cols);
    // svm_c is a per-sample constant (summed hinge); the trainer averages.
    SvmOptions opts;
    opts.c = cfg.svm_c * static_cast<double>(x.rows);
    opts.epochs = cfg.svm_epochs;
    auto res = train_ova_svm(x, labels, kNumClasses, opts);
    out.svm = std::move(res.model);
  });
  return out;
}

ModelPaths model_paths(const std::filesystem::path& dir) {
  return {dir / "unary.nzru", dir / "gmm.nzrg", dir / "svm.nzrs"};
}

TrainedModels run_training(const PipelineConfig& cfg, std::ostream* log) {
  in_stage("config", [&] { cfg.validate(); });
  if (cfg.class_weighting == ClassWeighting::kBoth) {
    throw ConfigError("config: train needs class_weighting on or off");
  }
  const auto corpus = in_stage("ingest", [&] {
    auto r = ingest(read_manifest(cfg.manifest), cfg.descriptors);
    if (r.scenes.empty()) throw DataError("corpus has no scenes with structures");
    return r;
  });
  log_line(log, "ingest: " + std::to_string(corpus.scenes.size()) + " scenes, " +
                    std::to_string(corpus.dropped_empty) + " empty dropped");
  std::vector<const LoadedScene*> all;
  for (const auto& s : corpus.scenes) all.push_back(&s);
  auto models = train_models(cfg, all, cfg.class_weighting == ClassWeighting::kOn, log);

  in_stage("write", [&] {
    const auto hash = model_config_hash(cfg);
    const auto paths = model_paths(cfg.model_dir);
    const std::array<std::filesystem::path, 3> finals = {paths.unary, paths.gmm, paths.svm};
    std::array<std::filesystem::path, 3> temps;
    for (std::size_t i = 0; i < 3; ++i) temps[i] = finals[i].string() + ".partial";
    try {
      std::filesystem::create_directories(cfg.model_dir);
      write_unary(temps[0], models.unary, hash);
      write_gmm(temps[1], models.gmm, hash);
      write_svm(temps[2], models.svm, hash);
      for (std::size_t i = 0; i < 3; ++i) std::filesystem::rename(temps[i], finals[i]);
    } catch (...) {
      std::error_code ec;
      for (const auto& p : temps) std::filesystem::remove(p, ec);
      for (const auto& p : finals) std::filesystem::remove(p, ec);
      throw;
    }
  });
  return models;
}

TrainedModels load_models(const PipelineConfig& cfg) {
  const auto paths = model_paths(cfg.model_dir);
  const auto expected = model_config_hash(cfg);
  auto check = [&](const std::filesystem::path& p, std::uint64_t got) {
    if (got != expected) {
      throw ConfigError(p.string() + " was trained under a different config (hash " +
                        hex64(got) + ", expected " + hex64(expected) + ")");
    }
  };
  TrainedModels m;
  std::uint64_t h = 0;
  m.unary = read_unary(paths.unary, &h);
  check(paths.unary, h);
  m.gmm = read_gmm(paths.gmm, &h);
  check(paths.gmm, h);
  m.svm = read_svm(paths.svm, &h);
  check(paths.svm, h);
  if (m.unary.dim != FilterBankParams::kDim || m.gmm.d != FilterBankParams::kDim ||
      m.svm.dim != FisherVector::length(m.gmm.k, m.gmm.d)) {
    throw DataError("model files in " + cfg.model_dir.string() + " do not fit together");
  }
  return m;
}

SceneInference infer_scene(const TrainedModels& models, const PipelineConfig& cfg,
                           const Image& img) {
  return infer_scene(models, cfg, img, pixel_descriptors(img, cfg.descriptors),
                     dense_descriptors(img, cfg.descriptors));
}

SceneInference infer_scene(const TrainedModels& models, const PipelineConfig& cfg,
                           const Image& img, const DescriptorSet& pixel_descs,
                           const DescriptorSet& dense_descs) {
  SceneInference r;
  r.pixel_stage = pixel_stage(models.unary, cfg, img, pixel_descs);
  r.segments = extract_segments(r.pixel_stage, cfg.min_area);
  for (auto& seg : r.segments) {
    r.pixel_labels.push_back(seg.predicted);
    try {
      seg.predicted = encode_and_classify(models, dense_descs, seg);
    } catch (const UnencodableSegment&) {
      seg.unencodable = true;
    }
  }
  r.final_map = paint_segments(img.width, img.height, r.segments);
  return r;
}

Image render_overlay(const Image& img, const LabelMap& labels) {
  static constexpr float kColours[kNumClasses][3] = {
      {0.0f, 0.0f, 0.0f}, {0.1f, 0.8f, 0.2f}, {1.0f, 0.75f, 0.0f}, {0.9f, 0.1f, 0.1f}};
  Image out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float g = img.gray(x, y);
      const int l = labels.at(x, y);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = l == 0 ? g : 0.5f * g + 0.5f * kColours[l][c];
      }
    }
  }
  return out;
}

StageMetrics evaluate_scenes(const TrainedModels& models, const PipelineConfig& cfg,
                             const std::vector<const LoadedScene*>& scenes) {
  StageMetrics m;
  std::vector<LabelMap> gts, preds;
  for (const auto* s : scenes) {
    const auto inf = infer_scene(models, cfg, s->image, s->pixel_descs, s->dense_descs);
    for (std::size_t i = 0; i < s->gt.labels.size(); ++i) {
      ++m.pixel_cm.at(s->gt.labels[i], inf.pixel_stage.labels[i]);
    }
    for (const auto& gseg : extract_segments(s->gt, cfg.min_area)) {
      int fv_label = 0;
      try {
        fv_label = encode_and_classify(models, s->dense_descs, gseg);
      } catch (const UnencodableSegment&) {
        // Counted as a miss.
      }
      ++m.fv_cm.at(gseg.predicted, fv_label);
      ++m.combined_cm.at(gseg.predicted, assign_gt_label(gseg, inf.final_map));
    }
    gts.push_back(s->gt);
    preds.push_back(inf.pixel_stage);
  }
  const auto acc = mean_pixel_accuracy(gts, preds);
  if (!acc.mean_class) throw DataError("evaluation scenes contain no damage pixels");
  if (m.fv_cm.total() == 0) throw DataError("evaluation scenes contain no structures");
  m.x = 100.0 * *acc.mean_class;
  m.pixel_global = 100.0 * acc.global;
  m.y = percent(trace(m.fv_cm), m.fv_cm.total());
  m.combined = percent(trace(m.combined_cm), m.combined_cm.total());
  m.hypothesis = hypothesis_product(m.x, m.y);
  return m;
}

CvResult run_cv(const PipelineConfig& cfg, std::ostream* log) {
  cfg.validate();
  auto corpus = in_stage("ingest", [&] {
    return ingest(read_manifest(cfg.manifest), cfg.descriptors);
  });
  log_line(log, "ingest: " + std::to_string(corpus.scenes.size()) + " scenes, " +
                    std::to_string(corpus.dropped_empty) + " empty dropped");
  auto res = run_cv(cfg, corpus.scenes, log);
  res.dropped_empty = corpus.dropped_empty;
  return res;
}

CvResult run_cv(const PipelineConfig& cfg, const std::vector<LoadedScene>& scenes,
                std::ostream* log) {
  cfg.validate();
  const auto folds = in_stage("folds", [&] {
    return make_folds(scenes.size(), static_cast<std::size_t>(cfg.folds), cfg.seed);
  });
  CvResult out;
  out.scenes = scenes.size();
  std::vector<bool> modes;
  if (cfg.class_weighting != ClassWeighting::kOff) modes.push_back(true);
  if (cfg.class_weighting != ClassWeighting::kOn) modes.push_back(false);
  for (bool weighted : modes) {
    CvRun run;
    run.weighted = weighted;
    for (std::size_t f = 0; f < folds.k; ++f) {
      FoldResult fr;
      fr.fold = static_cast<int>(f);
      std::vector<const LoadedScene*> train, test;
      for (auto i : folds.items_not_in(f)) train.push_back(&scenes[i]);
      for (auto i : folds.items_in(f)) test.push_back(&scenes[i]);
      log_line(log, std::string("fold ") + std::to_string(f) + " (weighting " +
                        (weighted ? "on" : "off") + "): " + std::to_string(train.size()) +
                        " train, " + std::to_string(test.size()) + " test");
      try {
        const auto models = train_models(cfg, train, weighted, log);
        fr.metrics = in_stage("evaluate", [&] { return evaluate_scenes(models, cfg, test); });
      } catch (const DataError& e) {
        fr.skip_reason = e.what();
        log_line(log, "warning: fold " + std::to_string(f) + " skipped: " + e.what());
      }
      run.folds.push_back(std::move(fr));
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

namespace {

ojson matrix_json(const ConfusionMatrix& cm) {
  ojson rows = ojson::array();
  for (std::size_t g = 0; g < cm.classes; ++g) {
    ojson row = ojson::array();
    for (std::size_t p = 0; p < cm.classes; ++p) row.push_back(cm.at(g, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson optional_json(std::optional<double> v) {
  return v ? ojson(*v) : ojson(nullptr);
}

ojson pr_json(const ConfusionMatrix& cm) {
  ojson out = ojson::array();
  const auto pr = precision_recall(cm);
  for (std::size_t c = 0; c < pr.size(); ++c) {
    ojson e;
    e["class"] = class_name(static_cast<int>(c));
    e["precision"] = optional_json(pr[c].precision);
    e["recall"] = optional_json(pr[c].recall);
    out.push_back(std::move(e));
  }
  return out;
}

ojson stage_json(const StageMetrics& m) {
  ojson j;
  j["segmentation_x"] = m.x;
  j["fv_y"] = m.y;
  j["hypothesis"] = m.hypothesis;
  j["combined"] = m.combined;
  j["pixel_global"] = m.pixel_global;
  j["confusion"] = {{"pixel", matrix_json(m.pixel_cm)},
                    {"fv", matrix_json(m.fv_cm)},
                    {"combined", matrix_json(m.combined_cm)}};
  return j;
}

template <class Get>
std::optional<CvReport> aggregate(const CvRun& run, Get get) {
  std::vector<std::optional<double>> v;
  for (const auto& f : run.folds) {
    v.push_back(f.metrics ? std::optional<double>(get(*f.metrics)) : std::nullopt);
  }
  return cv_aggregate_defined(v);
}

ojson report_json(const std::optional<CvReport>& r) {
  if (!r) return nullptr;
  ojson j;
  j["mean"] = r->mean;
  j["std_error"] = r->std_error;
  j["per_fold"] = r->per_fold;
  return j;
}

ConfusionMatrix summed(const CvRun& run, ConfusionMatrix StageMetrics::*which) {
  ConfusionMatrix total(kNumClasses);
  for (const auto& f : run.folds)
    if (f.metrics) total += (*f.metrics).*which;
  return total;
}

std::vector<ConfusionMatrix> per_fold(const CvRun& run,
                                      ConfusionMatrix StageMetrics::*which) {
  std::vector<ConfusionMatrix> out;
  for (const auto& f : run.folds)
    if (f.metrics) out.push_back((*f.metrics).*which);
  return out;
}

}  // namespace

std::string cv_report_json(const PipelineConfig& cfg, const CvResult& result) {
  ojson doc;
  ojson config;
  std::istringstream lines(config_to_text(cfg));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  doc["config"] = std::move(config);
  doc["scenes"] = result.scenes;
  doc["dropped_empty"] = result.dropped_empty;
  ojson runs = ojson::array();
  for (const auto& run : result.runs) {
    ojson r;
    r["class_weighting"] = run.weighted ? "on" : "off";
    ojson folds = ojson::array();
    for (const auto& f : run.folds) {
      ojson fj;
      fj["fold"] = f.fold;
      fj["skipped"] = !f.metrics.has_value();
      if (f.metrics) {
        fj["metrics"] = stage_json(*f.metrics);
      } else {
        fj["reason"] = f.skip_reason;
      }
      folds.push_back(std::move(fj));
    }
    r["folds"] = std::move(folds);
    ojson summary;
    summary["segmentation_x"] = report_json(aggregate(run, [](const StageMetrics& m) { return m.x; }));
    summary["fv_y"] = report_json(aggregate(run, [](const StageMetrics& m) { return m.y; }));
    summary["hypothesis"] =
        report_json(aggregate(run, [](const StageMetrics& m) { return m.hypothesis; }));
    summary["combined"] = report_json(aggregate(run, [](const StageMetrics& m) { return m.combined; }));
    summary["pixel_global"] =
        report_json(aggregate(run, [](const StageMetrics& m) { return m.pixel_global; }));
    r["summary"] = std::move(summary);
    r["precision_recall"] = {{"pixel", pr_json(summed(run, &StageMetrics::pixel_cm))},
                             {"fv", pr_json(summed(run, &StageMetrics::fv_cm))},
                             {"combined", pr_json(summed(run, &StageMetrics::combined_cm))}};
    runs.push_back(std::move(r));
  }
  doc["runs"] = std::move(runs);
  return doc.dump(2) + "\n";
}

std::string cv_report_table(const CvResult& result) {
  std::ostringstream out;
  const std::vector<std::string> names(kDisplayNames.begin(), kDisplayNames.end());
  for (const auto& run : result.runs) {
    out << "class weighting " << (run.weighted ? "on" : "off") << '\n';
    for (const auto& f : run.folds)
      if (!f.metrics) out << "  fold " << f.fold << " skipped: " << f.skip_reason << '\n';
    out << "Segmentation(X)  FV-CNN(Y)  Hypothesis(X*Y)  Combined\n";
    out << format_mean_se(aggregate(run, [](const StageMetrics& m) { return m.x; })) << "  "
        << format_mean_se(aggregate(run, [](const StageMetrics& m) { return m.y; })) << "  "
        << format_mean_se(aggregate(run, [](const StageMetrics& m) { return m.hypothesis; }))
        << "  "
        << format_mean_se(aggregate(run, [](const StageMetrics& m) { return m.combined; }))
        << "\n\n";
    out << "Combined confusion (row %, mean±se over folds)\n"
        << render_confusion_table(per_fold(run, &StageMetrics::combined_cm), names) << '\n';
    out << "Combined precision / recall\n"
        << render_precision_recall(precision_recall(summed(run, &StageMetrics::combined_cm)),
                                   names)
        << '\n';
  }
  return out.str();
}

std::string metrics_json(const StageMetrics& m) {
  ojson j = stage_json(m);
  j["precision_recall"] = {{"pixel", pr_json(m.pixel_cm)},
                           {"fv", pr_json(m.fv_cm)},
                           {"combined", pr_json(m.combined_cm)}};
  return j.dump(2) + "\n";
}

std::string metrics_table(const StageMetrics& m) {
  std::ostringstream out;
  const std::vector<std::string> names(kDisplayNames.begin(), kDisplayNames.end());
  out << "Segmentation(X)  FV-CNN(Y)  Hypothesis(X*Y)  Combined\n"
      << format_value(m.x) << "  " << format_value(m.y) << "  "
      << format_value(m.hypothesis) << "  " << format_value(m.combined) << "\n\n"
      << "Pixel-stage confusion (row %)\n"
      << render_confusion_table(m.pixel_cm, names) << '\n'
      << "Combined confusion (row %)\n"
      << render_confusion_table(m.combined_cm, names) << '\n'
      << "Combined precision / recall\n"
      << render_precision_recall(precision_recall(m.combined_cm), names);
  return out.str();
}

}  // namespace nazr
