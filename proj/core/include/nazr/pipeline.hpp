#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nazr/crf.hpp"
#include "nazr/descriptors.hpp"
#include "nazr/eval.hpp"
#include "nazr/gmm.hpp"
#include "nazr/image.hpp"
#include "nazr/segments.hpp"
#include "nazr/svm.hpp"
#include "nazr/synth.hpp"
#include "nazr/unary.hpp"

namespace nazr {

enum class ClassWeighting { kOn, kOff, kBoth };

const char* class_weighting_name(ClassWeighting w);

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path model_dir = "models";

  FilterBankParams descriptors;

  std::size_t gmm_k = 64;
  int gmm_max_iters = 200;
  double gmm_tol = 1e-6;
  std::size_t gmm_samples = 20000;  // descriptors drawn for EM

  int unary_epochs = 300;
  std::size_t unary_samples = 40000;  // pixels drawn for the unary fit

  int crf_iters = 10;
  double crf_tol = 1e-3;
  double theta_pos = 3.0;
  double theta_int = 0.1;
  double w_spatial = 1.0;
  double w_bilateral = 1.0;

  double svm_c = 1.0;  // weight of the summed hinge loss
  int svm_epochs = 300;

  ClassWeighting class_weighting = ClassWeighting::kOn;
  int folds = 5;
  std::uint64_t seed = 0;
  int min_area = kDefaultMinArea;

  // Throws ConfigError when a value is out of range.
  void validate() const;
  std::vector<CrfKernel> kernels() const;
};

// Sets one key from its textual value. Throws ConfigError on an unknown key
// or a malformed value.
void set_config_value(PipelineConfig& cfg, std::string_view key,
                      std::string_view value);
// key=value lines; '#' starts a comment.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
// Canonical form: every key, fixed order.
std::string config_to_text(const PipelineConfig& cfg);
// Hash over the keys that influence trained models (paths and fold count
// excluded).
std::uint64_t model_config_hash(const PipelineConfig& cfg);

// A corpus image with its majority-vote ground truth and cached descriptors.
struct LoadedScene {
  std::string id;
  Image image;
  LabelMap gt;
  DescriptorSet pixel_descs;  // stride 1, one per pixel
  DescriptorSet dense_descs;  // grid for FV encoding
};

struct IngestResult {
  std::vector<LoadedScene> scenes;
  std::size_t dropped_empty = 0;
  int skipped_polygons = 0;
};

// Loads every manifest entry, rasterizes and merges its annotations, and
// drops scenes without structures. Errors name the offending file.
IngestResult ingest(const Manifest& manifest, const FilterBankParams& params);

struct TrainedModels {
  UnaryModel unary;
  GmmModel gmm;
  SvmModel svm;
};

// All training stages in memory. Throws DataError when a class is missing
// from the training scenes.
TrainedModels train_models(const PipelineConfig& cfg,
                           const std::vector<const LoadedScene*>& scenes,
                           bool weighted, std::ostream* log = nullptr);

struct ModelPaths {
  std::filesystem::path unary, gmm, svm;
};
ModelPaths model_paths(const std::filesystem::path& dir);

// Ingest + train + write the three model files. Errors carry the stage name;
// no partial model files are left behind.
TrainedModels run_training(const PipelineConfig& cfg, std::ostream* log = nullptr);

// Reads the model files and refuses those written under a different config.
TrainedModels load_models(const PipelineConfig& cfg);

struct SceneInference {
  LabelMap pixel_stage;             // CRF-smoothed unary labels
  std::vector<SegmentRecord> segments;  // predicted = final class
  std::vector<int> pixel_labels;    // pixel-stage class per segment
  LabelMap final_map;
};

SceneInference infer_scene(const TrainedModels& models, const PipelineConfig& cfg,
                           const Image& img);
SceneInference infer_scene(const TrainedModels& models, const PipelineConfig& cfg,
                           const Image& img, const DescriptorSet& pixel_descs,
                           const DescriptorSet& dense_descs);

// Pixel-stage labels: unary probabilities smoothed by the dense CRF.
LabelMap pixel_stage(const UnaryModel& unary, const PipelineConfig& cfg,
                     const Image& img, const DescriptorSet& pixel_descs);

// Class colours blended over the gray image.
Image render_overlay(const Image& img, const LabelMap& labels);

struct StageMetrics {
  double x = 0.0;           // mean per-class pixel accuracy, pixel stage, %
  double y = 0.0;           // FV + SVM accuracy on ground-truth segments, %
  double hypothesis = 0.0;  // x * y / 100
  double combined = 0.0;    // final-label accuracy over ground-truth segments, %
  double pixel_global = 0.0;
  ConfusionMatrix pixel_cm{kNumClasses};
  ConfusionMatrix fv_cm{kNumClasses};
  ConfusionMatrix combined_cm{kNumClasses};
};

StageMetrics evaluate_scenes(const TrainedModels& models, const PipelineConfig& cfg,
                             const std::vector<const LoadedScene*>& scenes);

struct FoldResult {
  int fold = 0;
  std::optional<StageMetrics> metrics;  // nullopt when skipped
  std::string skip_reason;
};

struct CvRun {
  bool weighted = true;
  std::vector<FoldResult> folds;
};

struct CvResult {
  std::vector<CvRun> runs;
  std::size_t scenes = 0;
  std::size_t dropped_empty = 0;
};

CvResult run_cv(const PipelineConfig& cfg, std::ostream* log = nullptr);
CvResult run_cv(const PipelineConfig& cfg, const std::vector<LoadedScene>& scenes,
                std::ostream* log = nullptr);

// Deterministic JSON report (fixed key order).
std::string cv_report_json(const PipelineConfig& cfg, const CvResult& result);
std::string cv_report_table(const CvResult& result);
std::string metrics_json(const StageMetrics& m);
std::string metrics_table(const StageMetrics& m);

}  // namespace nazr
