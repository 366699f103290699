#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nazr/image.hpp"
#include "nazr/imaging.hpp"
#include "nazr/rng.hpp"

namespace nazr {

enum class BackgroundKind { kSmoothGradient, kSpeckle, kStripes, kMixed };

// Texture recipes by class. Local variance rises with severity.
enum class TextureKind { kMild, kMedium, kSevere };

struct SceneSpec {
  int width = 64;
  int height = 64;
  BackgroundKind background = BackgroundKind::kMixed;
  int min_structures = 1;
  int max_structures = 3;
  int min_side = 12;  // rotated-rectangle side lengths, pixels
  int max_side = 20;
  double max_rotation_deg = 25.0;
  int min_gap = 3;  // pixels between structure bounding boxes
  std::array<double, 3> class_frequencies = {0.54, 0.22, 0.24};
  int annotators = 3;
  double jitter_px = 1.0;
  // Row = true class (mild, medium, severe), column = annotated class.
  std::array<std::array<double, 3>, 3> label_confusion = {{
      {0.92, 0.06, 0.02},
      {0.04, 0.76, 0.20},
      {0.02, 0.18, 0.80},
  }};
  double empty_fraction = 0.0;  // probability that a scene has no structures
  int max_placement_retries = 200;

  // Zero jitter and identity label confusion.
  static SceneSpec noise_free();
  void validate() const;
};

struct Scene {
  Image image;
  AnnotationSet annotations;
  LabelMap truth;
  std::vector<Polygon> structures;  // noise-free polygons with true labels
};

// Throws DataError when the structures cannot be placed without overlap.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed,
                     const std::string& image_id = "scene");

// Intensity of a class texture at (x, y). Deterministic given the Rng state
// sequence, so callers must visit pixels in a fixed order.
float texture_value(TextureKind kind, int x, int y, Rng& rng,
                    std::span<const float> cell_noise, int cells_per_row);

// A w x h gray patch filled with one class texture.
Image texture_patch(TextureKind kind, int w, int h, std::uint64_t seed);

// Mean over pixels of the 5x5 local intensity variance, restricted to pixels
// whose whole window carries `label` in `truth`. nullopt when none qualify.
std::optional<double> mean_local_variance(const Image& img, const LabelMap& truth,
                                          int label);

struct CorpusEntry {
  std::filesystem::path image;
  std::filesystem::path annotations;
  std::filesystem::path truth;  // empty when unavailable
};

struct Manifest {
  std::vector<CorpusEntry> entries;
};

// JSON list of {"image", "annotations", "truth"} paths, relative to the
// manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Writes n scenes (scene_NNNN.pgm, scene_NNNN.json, scene_NNNN_truth.pgm)
// plus manifest.json under `dir`. Scene i uses seed mix_seed(seed, i).
Manifest generate_corpus(std::size_t n, const SceneSpec& spec, std::uint64_t seed,
                         const std::filesystem::path& dir);

}  // namespace nazr
