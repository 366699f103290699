#include "nazr/synth.hpp"

#include <gtest/gtest.h>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "test_support.hpp"

namespace nazr {
namespace {

TEST(Scene, NoiseFreeAnnotatorsMatchTruth) {
  const auto spec = SceneSpec::noise_free();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto scene = generate_scene(spec, seed);
    const auto raster = rasterize_annotations(scene.annotations, spec.width, spec.height);
    ASSERT_EQ(raster.maps.size(), 3u);
    for (const auto& m : raster.maps) EXPECT_EQ(m, scene.truth);
  }
}

TEST(Scene, TruthIsRasterOfStructures) {
  const SceneSpec spec;
  const auto scene = generate_scene(spec, 42);
  AnnotationSet truth_only;
  truth_only.annotators.push_back({"truth", scene.structures});
  EXPECT_EQ(rasterize_annotations(truth_only, spec.width, spec.height).maps[0],
            scene.truth);
  EXPECT_TRUE(has_structure(scene.truth));
}

TEST(Scene, Deterministic) {
  const SceneSpec spec;
  const auto a = generate_scene(spec, 7, "x");
  const auto b = generate_scene(spec, 7, "x");
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_EQ(annotations_to_json(a.annotations), annotations_to_json(b.annotations));
  EXPECT_EQ(a.truth, b.truth);
}

TEST(Scene, ClassFrequencies) {
  const SceneSpec spec;
  int counts[4] = {};
  int total = 0;
  for (std::uint64_t seed = 0; total < 500; ++seed) {
    for (const auto& p : generate_scene(spec, seed).structures) {
      ++counts[p.label];
      ++total;
    }
  }
  EXPECT_NEAR(counts[1] / static_cast<double>(total), 0.54, 0.05);
  EXPECT_NEAR(counts[2] / static_cast<double>(total), 0.22, 0.05);
  EXPECT_NEAR(counts[3] / static_cast<double>(total), 0.24, 0.05);
}

TEST(Scene, LocalVarianceOrdering) {
  const auto mild = texture_patch(TextureKind::kMild, 32, 32, 1);
  const auto medium = texture_patch(TextureKind::kMedium, 32, 32, 1);
  const auto severe = texture_patch(TextureKind::kSevere, 32, 32, 1);
  const LabelMap all(32, 32, 1);
  const double vm = *mean_local_variance(mild, all, 1);
  const double vd = *mean_local_variance(medium, all, 1);
  const double vs = *mean_local_variance(severe, all, 1);
  EXPECT_LT(vm, vd);
  EXPECT_LT(vd, vs);
}

TEST(Scene, LocalVarianceOrderingPerScene) {
  const SceneSpec spec;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto s = generate_scene(spec, seed);
    const auto m = mean_local_variance(s.image, s.truth, 1);
    const auto d = mean_local_variance(s.image, s.truth, 2);
    const auto v = mean_local_variance(s.image, s.truth, 3);
    if (m && d) EXPECT_LT(*m, *d);
    if (d && v) EXPECT_LT(*d, *v);
    if (m && v) EXPECT_LT(*m, *v);
    if ((m && d) || (d && v) || (m && v)) ++checked;
  }
  EXPECT_GT(checked, 5);
}

TEST(Scene, EmptyFraction) {
  SceneSpec spec;
  spec.empty_fraction = 0.65;
  std::vector<LabelMap> maps;
  for (std::uint64_t seed = 0; seed < 400; ++seed)
    maps.push_back(generate_scene(spec, seed).truth);
  const auto kept = filter_empty(maps, [](const LabelMap& m) -> const LabelMap& { return m; });
  EXPECT_NEAR(kept.size() / 400.0, 0.35, 0.06);
}

TEST(Scene, InvalidSpec) {
  SceneSpec spec;
  spec.min_side = 30;
  spec.max_side = 10;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Corpus, ManifestAndDeterminism) {
  testing::TempDir a("corpus_a"), b("corpus_b");
  const SceneSpec spec;
  const auto one = generate_corpus(1, spec, 5, a.path());
  EXPECT_EQ(one.entries.size(), 1u);
  const auto back = read_manifest(a / "manifest.json");
  ASSERT_EQ(back.entries.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(back.entries[0].image));

  generate_corpus(3, spec, 9, a.path());
  generate_corpus(3, spec, 9, b.path());
  for (const char* name : {"scene_0002.pgm", "scene_0002.json", "scene_0002_truth.pgm"}) {
    EXPECT_EQ(fnv1a64(read_file_bytes(a / name)), fnv1a64(read_file_bytes(b / name)))
        << name;
  }
}

}  // namespace
}  // namespace nazr
