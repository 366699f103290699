#include "nazr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "nazr/error.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

namespace {

constexpr int kGridPeriod = 4;
constexpr float kRoofBase = 0.62f;
constexpr float kGridLine = 0.16f;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

TextureKind texture_of(int label) {
  switch (label) {
    case 1: return TextureKind::kMild;
    case 2: return TextureKind::kMedium;
    default: return TextureKind::kSevere;
  }
}

float background_value(BackgroundKind kind, int x, int y, int w, Rng& rng) {
  switch (kind) {
    case BackgroundKind::kSmoothGradient:
      return clamp01(0.14 + 0.16 * x / std::max(1, w - 1) + rng.normal(0.0, 0.01));
    case BackgroundKind::kSpeckle:
      return clamp01(0.24 + rng.normal(0.0, 0.03));
    case BackgroundKind::kStripes:
    case BackgroundKind::kMixed:
      return clamp01(0.24 + 0.05 * std::sin(2.0 * std::numbers::pi * y / 9.0) +
                     rng.normal(0.0, 0.01));
  }
  return 0.0f;
}

// Per-cell dropout values for the medium texture; negative means intact.
std::vector<float> make_cell_noise(int w, int h, Rng& rng, int* cells_per_row) {
  const int cx = w / kGridPeriod + 1;
  const int cy = h / kGridPeriod + 1;
  *cells_per_row = cx;
  std::vector<float> cells(static_cast<std::size_t>(cx) * cy);
  for (auto& c : cells) {
    c = rng.uniform() < 0.35 ? static_cast<float>(rng.uniform(0.3, 0.95)) : -1.0f;
  }
  return cells;
}

std::vector<Point2> rotated_rectangle(double cx, double cy, double sx, double sy,
                                      double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<Point2> pts;
  const double hx = sx / 2, hy = sy / 2;
  const double corners[4][2] = {{-hx, -hy}, {hx, -hy}, {hx, hy}, {-hx, hy}};
  for (const auto& k : corners) {
    pts.push_back({cx + c * k[0] - s * k[1], cy + s * k[0] + c * k[1]});
  }
  return pts;
}

struct Box {
  double x0, y0, x1, y1;
};

Box bounds(const std::vector<Point2>& pts) {
  Box b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const auto& p : pts) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

}  // namespace

SceneSpec SceneSpec::noise_free() {
  SceneSpec s;
  s.jitter_px = 0.0;
  s.label_confusion = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  return s;
}

void SceneSpec::validate() const {
  if (width < 16 || height < 16) throw ConfigError("scene must be at least 16x16");
  if (min_structures < 0 || max_structures < min_structures) {
    throw ConfigError("invalid structure count range");
  }
  if (min_side < 4 || max_side < min_side) throw ConfigError("invalid side range");
  if (annotators < 1) throw ConfigError("need at least one annotator");
  if (jitter_px < 0.0) throw ConfigError("jitter must be >= 0");
  if (!(empty_fraction >= 0.0 && empty_fraction <= 1.0)) {
    throw ConfigError("empty fraction must lie in [0, 1]");
  }
  for (double f : class_frequencies) {
    if (f < 0.0) throw ConfigError("class frequencies must be >= 0");
  }
  for (const auto& row : label_confusion) {
    double s = 0.0;
    for (double v : row) {
      if (v < 0.0) throw ConfigError("label confusion entries must be >= 0");
      s += v;
    }
    if (s <= 0.0) throw ConfigError("label confusion rows must have mass");
  }
}

float texture_value(TextureKind kind, int x, int y, Rng& rng,
                    std::span<const float> cell_noise, int cells_per_row) {
  const bool on_line = (x % kGridPeriod == 0) || (y % kGridPeriod == 0);
  switch (kind) {
    case TextureKind::kMild:
      return clamp01(kRoofBase - (on_line ? kGridLine : 0.0f) + rng.normal(0.0, 0.012));
    case TextureKind::kMedium: {
      const float cell = cell_noise[static_cast<std::size_t>(y / kGridPeriod) *
                                        cells_per_row + x / kGridPeriod];
      if (cell >= 0.0f) return clamp01(cell + rng.normal(0.0, 0.02));
      return clamp01(kRoofBase - (on_line ? kGridLine : 0.0f) + rng.normal(0.0, 0.012));
    }
    case TextureKind::kSevere:
      return clamp01(0.55 + rng.normal(0.0, 0.2));
  }
  return 0.0f;
}

Image texture_patch(TextureKind kind, int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  int cells_per_row = 0;
  const auto cells = make_cell_noise(w, h, rng, &cells_per_row);
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(x, y) = texture_value(kind, x, y, rng, cells, cells_per_row);
  return img;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed,
                     const std::string& image_id) {
  spec.validate();
  Rng rng(seed);
  Scene scene;
  const int w = spec.width, h = spec.height;

  int count = 0;
  if (rng.uniform() >= spec.empty_fraction) {
    count = spec.min_structures +
            static_cast<int>(rng.index(spec.max_structures - spec.min_structures + 1));
  }
  std::vector<Box> placed;
  for (int s = 0; s < count; ++s) {
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_placement_retries && !ok; ++attempt) {
      const double sx = rng.uniform(spec.min_side, spec.max_side);
      const double sy = rng.uniform(spec.min_side, spec.max_side);
      const double angle =
          rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * std::numbers::pi / 180.0;
      const double cx = rng.uniform(0.0, w);
      const double cy = rng.uniform(0.0, h);
      auto pts = rotated_rectangle(cx, cy, sx, sy, angle);
      const Box b = bounds(pts);
      if (b.x0 < 1.0 || b.y0 < 1.0 || b.x1 > w - 1.0 || b.y1 > h - 1.0) continue;
      bool clear = true;
      for (const auto& o : placed) {
        if (b.x0 < o.x1 + spec.min_gap && o.x0 < b.x1 + spec.min_gap &&
            b.y0 < o.y1 + spec.min_gap && o.y0 < b.y1 + spec.min_gap) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      placed.push_back(b);
      Polygon poly;
      poly.label = 1 + static_cast<int>(rng.categorical(spec.class_frequencies));
      poly.points = std::move(pts);
      scene.structures.push_back(std::move(poly));
      ok = true;
    }
    if (!ok) {
      throw DataError("cannot place " + std::to_string(count) +
                      " non-overlapping structures in a " + std::to_string(w) +
                      "x" + std::to_string(h) + " scene");
    }
  }

  AnnotationSet truth_set;
  truth_set.image_id = image_id;
  truth_set.width = w;
  truth_set.height = h;
  truth_set.annotators.push_back({"truth", scene.structures});
  scene.truth = rasterize_annotations(truth_set, w, h).maps.front();

  BackgroundKind bg = spec.background;
  if (bg == BackgroundKind::kMixed) {
    bg = static_cast<BackgroundKind>(rng.index(3));
  }
  int cells_per_row = 0;
  const auto cells = make_cell_noise(w, h, rng, &cells_per_row);
  scene.image = Image(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = scene.truth.at(x, y);
      scene.image.at(x, y) =
          label == 0 ? background_value(bg, x, y, w, rng)
                     : texture_value(texture_of(label), x, y, rng, cells, cells_per_row);
    }
  }

  scene.annotations.image_id = image_id;
  scene.annotations.width = w;
  scene.annotations.height = h;
  for (int a = 0; a < spec.annotators; ++a) {
    AnnotatorPolygons ap;
    ap.annotator = "annotator_" + std::to_string(a);
    for (const auto& s : scene.structures) {
      Polygon p = s;
      if (spec.jitter_px > 0.0) {
        for (auto& pt : p.points) {
          pt.x += rng.uniform(-spec.jitter_px, spec.jitter_px);
          pt.y += rng.uniform(-spec.jitter_px, spec.jitter_px);
        }
      }
      p.label = 1 + static_cast<int>(rng.categorical(spec.label_confusion[s.label - 1]));
      ap.polygons.push_back(std::move(p));
    }
    scene.annotations.annotators.push_back(std::move(ap));
  }
  return scene;
}

std::optional<double> mean_local_variance(const Image& img, const LabelMap& truth,
                                          int label) {
  constexpr int r = 2;
  double total = 0.0;
  std::size_t count = 0;
  for (int y = r; y < img.height - r; ++y) {
    for (int x = r; x < img.width - r; ++x) {
      bool uniform = true;
      double s = 0.0, s2 = 0.0;
      for (int dy = -r; dy <= r && uniform; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (truth.at(x + dx, y + dy) != label) {
            uniform = false;
            break;
          }
          const double v = img.gray(x + dx, y + dy);
          s += v;
          s2 += v * v;
        }
      }
      if (!uniform) continue;
      const double n = (2 * r + 1) * (2 * r + 1);
      total += s2 / n - (s / n) * (s / n);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest m;
  const auto base = path.parent_path();
  try {
    const auto doc = nlohmann::json::parse(ss.str());
    if (!doc.is_array()) throw DataError("manifest must be a JSON list");
    for (const auto& e : doc) {
      CorpusEntry entry;
      entry.image = base / e.at("image").get<std::string>();
      entry.annotations = base / e.at("annotations").get<std::string>();
      if (e.contains("truth") && !e.at("truth").is_null()) {
        entry.truth = base / e.at("truth").get<std::string>();
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  const auto base = path.parent_path();
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j;
    j["image"] = e.image.lexically_relative(base).generic_string();
    j["annotations"] = e.annotations.lexically_relative(base).generic_string();
    if (!e.truth.empty()) {
      j["truth"] = e.truth.lexically_relative(base).generic_string();
    } else {
      j["truth"] = nullptr;
    }
    doc.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

Manifest generate_corpus(std::size_t n, const SceneSpec& spec, std::uint64_t seed,
                         const std::filesystem::path& dir) {
  if (n < 1) throw ConfigError("corpus needs at least one scene");
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  Manifest m;
  m.entries.resize(n);
  parallel_for(n, [&](std::size_t i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%04zu", i);
    const Scene scene = generate_scene(spec, mix_seed(seed, i), stem);
    CorpusEntry e;
    e.image = dir / (std::string(stem) + ".pgm");
    e.annotations = dir / (std::string(stem) + ".json");
    e.truth = dir / (std::string(stem) + "_truth.pgm");
    write_pnm(e.image, scene.image);
    write_annotations(e.annotations, scene.annotations);
    write_label_map(e.truth, scene.truth);
    m.entries[i] = std::move(e);
  });
  write_manifest(dir / "manifest.json", m);
  return m;
}

}  // namespace nazr
