#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nazr/image.hpp"

namespace nazr {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Polygon {
  int label = 1;  // 1..3, never background
  std::vector<Point2> points;
};

struct AnnotatorPolygons {
  std::string annotator;
  std::vector<Polygon> polygons;
};

struct AnnotationSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatorPolygons> annotators;
};

// JSON document per image:
// {"image", "width", "height", "annotations": [{"annotator", "polygons":
//   [{"label": "mild"|"medium"|"severe", "points": [[x,y], ...]}]}]}
AnnotationSet parse_annotations(const std::string& json_text);
std::string annotations_to_json(const AnnotationSet& ann);
AnnotationSet read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path,
                       const AnnotationSet& ann);

// Even-odd test of a single point against a closed polygon ring.
bool point_in_polygon(std::span<const Point2> ring, double x, double y);

struct RasterResult {
  std::vector<LabelMap> maps;  // one per annotator, in annotation order
  int skipped_polygons = 0;    // fewer than three distinct vertices
};

// Fills each polygon interior under the even-odd rule, sampling pixel
// centres (x + 0.5, y + 0.5). Where polygons overlap the more severe class
// wins.
RasterResult rasterize_annotations(const AnnotationSet& ann, int width,
                                   int height);

// Per-pixel mode over annotators; ties go to the more severe class.
LabelMap majority_vote(std::span<const LabelMap> maps);

struct FoldAssignment {
  std::size_t n_items = 0;
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // item index -> fold index

  std::vector<std::size_t> items_in(std::size_t fold) const;
  std::vector<std::size_t> items_not_in(std::size_t fold) const;
};

// Shuffles [0, n) with a seeded Rng and deals positions round-robin, so fold
// sizes differ by at most one.
FoldAssignment make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

// True when the map holds at least one non-background pixel.
bool has_structure(const LabelMap& lm);

template <class Item, class LabelOf>
std::vector<Item> filter_empty(std::vector<Item> items, LabelOf label_of) {
  std::vector<Item> kept;
  kept.reserve(items.size());
  for (auto& item : items) {
    if (has_structure(label_of(item))) kept.push_back(std::move(item));
  }
  return kept;
}

}  // namespace nazr
