#include "nazr/imaging.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <set>

#include "nazr/error.hpp"
#include "test_support.hpp"

namespace nazr {
namespace {

AnnotationSet single(std::vector<Polygon> polys, int w, int h) {
  AnnotationSet a;
  a.image_id = "t";
  a.width = w;
  a.height = h;
  a.annotators.push_back({"a0", std::move(polys)});
  return a;
}

Polygon poly(int label, std::vector<Point2> pts) { return Polygon{label, std::move(pts)}; }

TEST(Rasterize, SquareOnEmptyGrid) {
  auto ann = single({poly(3, {{2, 2}, {6, 2}, {6, 6}, {2, 6}})}, 10, 10);
  auto res = rasterize_annotations(ann, 10, 10);
  ASSERT_EQ(res.maps.size(), 1u);
  const auto& lm = res.maps[0];
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      const bool inside = x >= 2 && x < 6 && y >= 2 && y < 6;
      EXPECT_EQ(lm.at(x, y), inside ? 3 : 0) << x << "," << y;
    }
}

TEST(Rasterize, NestedPolygonsSeverityWins) {
  auto ann = single({poly(1, {{0, 0}, {10, 0}, {10, 10}, {0, 10}}),
                     poly(3, {{3, 3}, {7, 3}, {7, 7}, {3, 7}})},
                    10, 10);
  const auto lm = rasterize_annotations(ann, 10, 10).maps[0];
  EXPECT_EQ(lm.at(5, 5), 3);
  EXPECT_EQ(lm.at(1, 1), 1);
  // Order of polygons must not matter.
  std::swap(ann.annotators[0].polygons[0], ann.annotators[0].polygons[1]);
  EXPECT_EQ(rasterize_annotations(ann, 10, 10).maps[0], lm);
}

TEST(Rasterize, TriangleMatchesBruteForcePointInPolygon) {
  const std::vector<Point2> tri = {{0, 0}, {4, 0}, {0, 4}};
  auto ann = single({poly(2, tri)}, 5, 5);
  const auto lm = rasterize_annotations(ann, 5, 5).maps[0];
  int inside_count = 0;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      // Independent even-odd test: cast a ray to +x and count edge crossings.
      const double px = x + 0.5, py = y + 0.5;
      int crossings = 0;
      for (int e = 0; e < 3; ++e) {
        const Point2 a = tri[e], b = tri[(e + 1) % 3];
        if ((a.y <= py && b.y > py) || (b.y <= py && a.y > py)) {
          const double t = (py - a.y) / (b.y - a.y);
          if (a.x + t * (b.x - a.x) > px) ++crossings;
        }
      }
      const bool inside = crossings % 2 == 1;
      inside_count += inside;
      EXPECT_EQ(lm.at(x, y), inside ? 2 : 0) << x << "," << y;
    }
  }
  // Pixel centres with x + y < 3.
  EXPECT_EQ(inside_count, 6);
}

TEST(Rasterize, RandomPolygonsMatchPointInPolygonEverywhere) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts;
    const int n = 3 + static_cast<int>(rng.index(5));
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(-2, 14), rng.uniform(-2, 14)});
    auto ann = single({poly(1, pts)}, 12, 12);
    const auto lm = rasterize_annotations(ann, 12, 12).maps[0];
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        ASSERT_EQ(lm.at(x, y) == 1, point_in_polygon(pts, x + 0.5, y + 0.5));
  }
}

TEST(Rasterize, DegeneratePolygonSkippedWithCount) {
  auto ann = single({poly(2, {{1, 1}, {5, 5}, {1, 1}}), poly(2, {{1, 1}, {4, 1}})}, 8, 8);
  const auto res = rasterize_annotations(ann, 8, 8);
  EXPECT_EQ(res.skipped_polygons, 2);
  EXPECT_FALSE(has_structure(res.maps[0]));
}

TEST(Rasterize, DeterministicAndIdempotent) {
  auto ann = single({poly(2, {{0.3, 1.7}, {7.2, 0.4}, {5.5, 6.1}, {1.1, 5.0}})}, 8, 8);
  EXPECT_EQ(rasterize_annotations(ann, 8, 8).maps[0],
            rasterize_annotations(ann, 8, 8).maps[0]);
}

TEST(MajorityVote, SingleAnnotatorIsIdentity) {
  LabelMap m(3, 2);
  m.labels = {0, 1, 2, 3, 2, 1};
  std::vector<LabelMap> maps = {m};
  EXPECT_EQ(majority_vote(maps), m);
}

TEST(MajorityVote, StrictMajorityAndSeverityTieBreak) {
  auto make = [](std::uint8_t v) { return LabelMap(1, 1, v); };
  std::vector<LabelMap> ssmd = {make(3), make(3), make(2)};
  EXPECT_EQ(majority_vote(ssmd).labels[0], 3);
  std::vector<LabelMap> ms = {make(1), make(3)};
  EXPECT_EQ(majority_vote(ms).labels[0], 3);
}

TEST(MajorityVote, MatchesExhaustiveVoteCounting) {
  // Every vote combination of three annotators over four classes.
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        std::array<int, 4> votes{};
        ++votes[a], ++votes[b], ++votes[c];
        const int top = *std::max_element(votes.begin(), votes.end());
        int expected = 0;
        for (int k = 0; k < 4; ++k)
          if (votes[k] == top) expected = k;  // most severe among the tied
        std::vector<LabelMap> maps = {LabelMap(1, 1, a), LabelMap(1, 1, b),
                                      LabelMap(1, 1, c)};
        ASSERT_EQ(majority_vote(maps).labels[0], expected);
      }
}

TEST(MajorityVote, PermutationInvariant) {
  Rng rng(3);
  std::vector<LabelMap> maps;
  for (int a = 0; a < 4; ++a) {
    LabelMap m(6, 5);
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.index(4));
    maps.push_back(m);
  }
  const auto ref = majority_vote(maps);
  std::sort(maps.begin(), maps.end(),
            [](const LabelMap& x, const LabelMap& y) { return x.labels < y.labels; });
  do {
    ASSERT_EQ(majority_vote(maps), ref);
  } while (std::next_permutation(
      maps.begin(), maps.end(),
      [](const LabelMap& x, const LabelMap& y) { return x.labels < y.labels; }));
}

TEST(MajorityVote, DimensionMismatchThrows) {
  std::vector<LabelMap> maps = {LabelMap(2, 2), LabelMap(3, 2)};
  EXPECT_THROW(majority_vote(maps), DataError);
  EXPECT_THROW(majority_vote(std::vector<LabelMap>{}), DataError);
}

TEST(Folds, FiveFoldSplitIsEven) {
  const auto fa = make_folds(1085, 5, 7);
  for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(fa.items_in(f).size(), 217u);
}

TEST(Folds, OneItemPerFold) {
  const auto fa = make_folds(5, 5, 1);
  std::set<std::size_t> folds(fa.fold_of.begin(), fa.fold_of.end());
  EXPECT_EQ(folds.size(), 5u);
}

TEST(Folds, DeterministicGivenSeed) {
  EXPECT_EQ(make_folds(100, 4, 9).fold_of, make_folds(100, 4, 9).fold_of);
  EXPECT_NE(make_folds(100, 4, 9).fold_of, make_folds(100, 4, 10).fold_of);
}

TEST(Folds, PartitionPropertyForManyShapes) {
  for (std::size_t n = 2; n < 60; n += 7) {
    for (std::size_t k = 2; k <= n && k < 9; ++k) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto fa = make_folds(n, k, seed);
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0;
        for (std::size_t f = 0; f < k; ++f) {
          auto items = fa.items_in(f);
          lo = std::min(lo, items.size());
          hi = std::max(hi, items.size());
          for (auto i : items) ++seen[i];
        }
        for (int s : seen) ASSERT_EQ(s, 1);
        ASSERT_LE(hi - lo, 1u);
      }
    }
  }
}

TEST(Folds, TooFewItemsIsAnError) {
  EXPECT_THROW(make_folds(3, 5, 0), ConfigError);
  EXPECT_THROW(make_folds(10, 1, 0), ConfigError);
}

TEST(FilterEmpty, KeepsOnlyMapsWithStructures) {
  struct Item {
    int id;
    LabelMap lm;
  };
  std::vector<Item> items;
  for (int i = 0; i < 10; ++i) {
    LabelMap lm(4, 4);
    if (i % 5 == 1 || i % 5 == 3) lm.at(i % 4, 2) = 3;  // 4 of 10 non-empty
    items.push_back({i, lm});
  }
  auto kept = filter_empty(items, [](const Item& it) -> const LabelMap& { return it.lm; });
  ASSERT_EQ(kept.size(), 4u);
  EXPECT_EQ(kept[0].id, 1);
  EXPECT_FALSE(has_structure(LabelMap(3, 3)));
  LabelMap one(3, 3);
  one.at(2, 2) = 3;
  EXPECT_TRUE(has_structure(one));
}

TEST(AnnotationJson, ParsesSchemaAndRoundTrips) {
  const std::string doc = R"({"image": "img1", "width": 8, "height": 6,
    "annotations": [{"annotator": "a", "polygons": [
      {"label": "severe", "points": [[1,1],[5,1],[5,4]]}]},
      {"annotator": "b", "polygons": []}]})";
  const auto ann = parse_annotations(doc);
  EXPECT_EQ(ann.image_id, "img1");
  ASSERT_EQ(ann.annotators.size(), 2u);
  EXPECT_EQ(ann.annotators[0].polygons[0].label, 3);
  const auto again = parse_annotations(annotations_to_json(ann));
  EXPECT_EQ(again.annotators[0].polygons[0].points, ann.annotators[0].polygons[0].points);
  EXPECT_THROW(parse_annotations(R"({"image": "x"})"), DataError);
  EXPECT_THROW(parse_annotations(R"({"image":"x","width":2,"height":2,"annotations":
    [{"annotator":"a","polygons":[{"label":"bad","points":[]}]}]})"),
               DataError);
}

}  // namespace
}  // namespace nazr
