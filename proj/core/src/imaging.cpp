#include "nazr/imaging.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nazr/error.hpp"
#include "nazr/rng.hpp"

namespace nazr {

using nlohmann::json;

AnnotationSet parse_annotations(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("annotation JSON: ") + e.what());
  }
  AnnotationSet ann;
  try {
    ann.image_id = doc.at("image").get<std::string>();
    ann.width = doc.at("width").get<int>();
    ann.height = doc.at("height").get<int>();
    for (const auto& a : doc.at("annotations")) {
      AnnotatorPolygons ap;
      ap.annotator = a.at("annotator").get<std::string>();
      for (const auto& p : a.at("polygons")) {
        Polygon poly;
        poly.label = parse_damage_label(p.at("label").get<std::string>());
        for (const auto& pt : p.at("points")) {
          if (!pt.is_array() || pt.size() != 2) {
            throw DataError("polygon point must be [x, y]");
          }
          poly.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        ap.polygons.push_back(std::move(poly));
      }
      ann.annotators.push_back(std::move(ap));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("annotation schema: ") + e.what());
  }
  if (ann.width <= 0 || ann.height <= 0) {
    throw DataError("annotation width/height must be positive");
  }
  return ann;
}

std::string annotations_to_json(const AnnotationSet& ann) {
  json doc;
  doc["image"] = ann.image_id;
  doc["width"] = ann.width;
  doc["height"] = ann.height;
  json list = json::array();
  for (const auto& a : ann.annotators) {
    json polys = json::array();
    for (const auto& p : a.polygons) {
      json pts = json::array();
      for (const auto& pt : p.points) pts.push_back({pt.x, pt.y});
      polys.push_back({{"label", class_name(p.label)}, {"points", pts}});
    }
    list.push_back({{"annotator", a.annotator}, {"polygons", polys}});
  }
  doc["annotations"] = list;
  return doc.dump();
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_annotations(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_annotations(const std::filesystem::path& path,
                       const AnnotationSet& ann) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << annotations_to_json(ann) << "\n";
}

bool point_in_polygon(std::span<const Point2> ring, double x, double y) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = ring[i];
    const Point2& b = ring[j];
    if ((a.y > y) != (b.y > y)) {
      double x_cross = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

std::size_t distinct_vertices(const std::vector<Point2>& pts) {
  std::vector<Point2> seen;
  for (const auto& p : pts) {
    if (std::find(seen.begin(), seen.end(), p) == seen.end()) seen.push_back(p);
  }
  return seen.size();
}

// Scanline fill: for each row centre, collect edge crossings, sort, and fill
// between pairs. Equivalent to point_in_polygon at every pixel centre.
void fill_polygon(const Polygon& poly, LabelMap& lm) {
  const auto& pts = poly.points;
  const std::size_t n = pts.size();
  std::vector<double> xs;
  for (int y = 0; y < lm.height; ++y) {
    const double cy = y + 0.5;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = pts[i];
      const Point2& b = pts[j];
      if ((a.y > cy) != (b.y > cy)) {
        xs.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Inside iff xs[k] <= cx < xs[k+1], mirroring the strict x < x_cross
      // toggle in point_in_polygon.
      for (int x = 0; x < lm.width; ++x) {
        const double cx = x + 0.5;
        if (cx >= xs[k + 1]) break;
        if (cx < xs[k]) continue;
        auto label = static_cast<std::uint8_t>(poly.label);
        if (label > lm.at(x, y)) lm.at(x, y) = label;
      }
    }
  }
}

}  // namespace

RasterResult rasterize_annotations(const AnnotationSet& ann, int width,
                                   int height) {
  if (width <= 0 || height <= 0) {
    throw DataError("raster dimensions must be positive");
  }
  RasterResult result;
  for (const auto& annotator : ann.annotators) {
    LabelMap lm(width, height);
    for (const auto& poly : annotator.polygons) {
      if (poly.label < 1 || poly.label > 3) {
        throw DataError("polygon label must be mild, medium or severe");
      }
      if (distinct_vertices(poly.points) < 3) {
        ++result.skipped_polygons;
        continue;
      }
      fill_polygon(poly, lm);
    }
    result.maps.push_back(std::move(lm));
  }
  return result;
}

LabelMap majority_vote(std::span<const LabelMap> maps) {
  if (maps.empty()) throw DataError("majority_vote needs at least one map");
  const LabelMap& first = maps.front();
  for (const auto& m : maps) {
    if (!m.same_grid(first)) {
      throw DataError("majority_vote: label map dimensions differ");
    }
  }
  LabelMap out(first.width, first.height);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    std::array<int, kNumClasses> votes{};
    for (const auto& m : maps) ++votes[m.labels[i]];
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
      if (votes[c] >= votes[best]) best = c;  // >= favours severity on ties
    }
    out.labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::items_in(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::items_not_in(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

FoldAssignment make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (n < k) {
    throw ConfigError("cannot split " + std::to_string(n) + " items into " +
                      std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  FoldAssignment fa;
  fa.n_items = n;
  fa.k = k;
  fa.fold_of.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) fa.fold_of[order[pos]] = pos % k;
  return fa;
}

bool has_structure(const LabelMap& lm) {
  return std::any_of(lm.labels.begin(), lm.labels.end(),
                     [](std::uint8_t v) { return v != 0; });
}

}  // namespace nazr
