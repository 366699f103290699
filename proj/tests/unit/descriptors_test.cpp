#include "nazr/descriptors.hpp"

#include <gtest/gtest.h>

#include <limits>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "test_support.hpp"

namespace nazr {
namespace {

using P = FilterBankParams;

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, 1);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

TEST(DenseDescriptors, ConstantImageHasZeroFilterResponses) {
  const Image img(20, 17, 1, 0.37f);
  const auto ds = dense_descriptors(img, {7, 3});
  ASSERT_FALSE(ds.empty());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.row(i);
    for (std::uint32_t k = P::kGradientBegin; k < P::kLaplacianBegin + 2; ++k) {
      ASSERT_EQ(r[k], 0.0f) << "component " << k;
    }
  }
}

TEST(DenseDescriptors, VerticalStepEdgeGradientSign) {
  // 3x3 patch, columns 0 0 1. Central differences with edge replication give
  // dx = 0, 0.5, 0.5 per row, so the patch mean of dx is 1/3 and dy is 0.
  Image img(3, 3, 1, 0.0f);
  for (int y = 0; y < 3; ++y) img.at(2, y) = 1.0f;
  const auto ds = dense_descriptors(img, {3, 1});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_FLOAT_EQ(ds.row(0)[P::kGradientBegin], 1.0f / 3.0f);
  EXPECT_FLOAT_EQ(ds.row(0)[P::kGradientBegin + 2], 0.0f);

  Image flipped(3, 3, 1, 0.0f);
  for (int y = 0; y < 3; ++y) flipped.at(0, y) = 1.0f;
  const auto df = dense_descriptors(flipped, {3, 1});
  EXPECT_FLOAT_EQ(df.row(0)[P::kGradientBegin], -1.0f / 3.0f);
}

TEST(DenseDescriptors, GridCountFormula) {
  for (int w : {7, 8, 19, 33})
    for (int h : {7, 12, 25})
      for (int s : {1, 2, 3, 5}) {
        const P p{7, s};
        const auto ds = dense_descriptors(random_image(w, h, 1), p);
        const std::size_t expected =
            static_cast<std::size_t>((w - 7) / s + 1) * ((h - 7) / s + 1);
        ASSERT_EQ(ds.size(), expected);
        ASSERT_EQ(dense_grid_count(w, h, p), expected);
      }
}

TEST(DenseDescriptors, ImageSmallerThanPatchIsAnError) {
  EXPECT_THROW(dense_descriptors(Image(5, 9, 1), {7, 1}), ConfigError);
  EXPECT_THROW(dense_descriptors(Image(9, 9, 1), {6, 1}), ConfigError);
}

TEST(DenseDescriptors, Deterministic) {
  const auto img = random_image(25, 21, 4);
  EXPECT_TRUE(dense_descriptors(img, {}).bit_equal(dense_descriptors(img, {})));
}

TEST(DenseDescriptors, TranslationConsistentOnInteriorGrid) {
  const P p{7, 2};
  const Image base = random_image(30, 26, 8);
  Image shifted(30, 26, 1);
  for (int y = 0; y < 26; ++y)
    for (int x = 0; x < 30; ++x)
      shifted.at(x, y) = base.at(std::max(0, x - p.stride), y);
  const auto a = dense_descriptors(base, p);
  const auto b = dense_descriptors(shifted, p);
  // Filter support reaches half + 2 pixels from the centre.
  const int reach = p.patch_size / 2 + 2;
  int compared = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int cx = static_cast<int>(a.xs[i]), cy = static_cast<int>(a.ys[i]);
    if (cx - reach < 0 || cy - reach < 0 || cx + p.stride + reach >= 30 ||
        cy + reach >= 26)
      continue;
    std::size_t j = 0;
    while (j < b.size() && !(b.xs[j] == a.xs[i] + p.stride && b.ys[j] == a.ys[i])) ++j;
    ASSERT_LT(j, b.size());
    for (std::uint32_t k = 0; k < a.dim; ++k) ASSERT_EQ(a.row(i)[k], b.row(j)[k]);
    ++compared;
  }
  EXPECT_GT(compared, 10);
}

TEST(PixelDescriptors, OnePerPixelRowMajor) {
  const auto img = random_image(9, 6, 2);
  const auto ds = pixel_descriptors(img, {});
  ASSERT_EQ(ds.size(), 54u);
  EXPECT_EQ(ds.xs[10], 1u);
  EXPECT_EQ(ds.ys[10], 1u);
}

TEST(DescriptorFile, EmptySetRoundTrips) {
  DescriptorSet ds(16);
  EXPECT_TRUE(decode_descriptors(encode_descriptors(ds)).bit_equal(ds));
}

TEST(DescriptorFile, RoundTripsBitExactly) {
  testing::TempDir dir("desc");
  DescriptorSet ds(4);
  const float a[] = {1.5f, -0.0f, std::numeric_limits<float>::denorm_min(), 3e38f};
  const float b[] = {0.1f, 0.2f, 0.3f, 0.4f};
  const float c[] = {-7.0f, 1e-30f, 42.0f, -1.0f};
  ds.push_back(3, 4, a);
  ds.push_back(0, 0, b);
  ds.push_back(99, 7, c);
  write_descriptors(ds, dir / "d.nzrd");
  EXPECT_TRUE(read_descriptors(dir / "d.nzrd").bit_equal(ds));
}

TEST(DescriptorFile, ExtractedSetRoundTrips) {
  const auto ds = dense_descriptors(random_image(40, 31, 5), {7, 3});
  EXPECT_TRUE(decode_descriptors(encode_descriptors(ds)).bit_equal(ds));
}

FormatFault fault_of(std::span<const std::uint8_t> bytes) {
  try {
    decode_descriptors(bytes);
  } catch (const FormatError& e) {
    return e.fault();
  }
  ADD_FAILURE() << "no error";
  return FormatFault::kIo;
}

TEST(DescriptorFile, DistinctErrorsForCorruptInput) {
  DescriptorSet ds(2);
  const float v[] = {1.0f, 2.0f};
  ds.push_back(1, 1, v);
  auto bytes = encode_descriptors(ds);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(fault_of(bad_magic), FormatFault::kBadMagic);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(fault_of(truncated), FormatFault::kTruncated);

  ByteWriter w;
  w.magic("NZRD");
  w.u16(1);
  w.u32(0xFFFFFFFFu);
  w.u32(0xFFFFFFFFu);
  EXPECT_EQ(fault_of(w.bytes()), FormatFault::kOverflow);
}

}  // namespace
}  // namespace nazr
