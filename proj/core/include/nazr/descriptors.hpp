#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nazr/image.hpp"

namespace nazr {

// N local feature vectors of dimension `dim`, each attached to the pixel at
// its patch centre. Values are float32 so the on-disk form is lossless.
struct DescriptorSet {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> xs;
  std::vector<std::uint32_t> ys;
  std::vector<float> values;  // size() * dim, row-major

  DescriptorSet() = default;
  explicit DescriptorSet(std::uint32_t d) : dim(d) {}

  std::size_t size() const { return xs.size(); }
  bool empty() const { return xs.empty(); }
  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  void push_back(std::uint32_t x, std::uint32_t y, std::span<const float> v);
  void append_from(const DescriptorSet& other, std::size_t i);

  // Bitwise equality of every field (distinguishes -0.0f from 0.0f).
  bool bit_equal(const DescriptorSet& other) const;
};

// Filter bank layout. All components are computed on the gray image with
// edge replication at the borders.
//   [0]       patch mean intensity
//   [1..9]    3x3 cell means minus patch mean
//   [10..13]  signed mean oriented derivative at 0, 45, 90, 135 degrees
//   [14..17]  mean absolute oriented derivative, same orientations
//   [18..19]  mean absolute Laplacian at offsets 1 and 2
//   [20]      local standard deviation
struct FilterBankParams {
  int patch_size = 7;  // odd
  int stride = 2;

  static constexpr std::uint32_t kDim = 21;
  static constexpr std::uint32_t kMeanIndex = 0;
  static constexpr std::uint32_t kCellBegin = 1;
  static constexpr std::uint32_t kGradientBegin = 10;  // 0 deg first
  static constexpr std::uint32_t kGradientEnergyBegin = 14;
  static constexpr std::uint32_t kLaplacianBegin = 18;
  static constexpr std::uint32_t kStdIndex = 20;

  void validate() const;
};

// One descriptor per grid position (top-left corners at multiples of the
// stride, patch fully inside the image). Throws ConfigError when the image is
// smaller than the patch.
DescriptorSet dense_descriptors(const Image& img, const FilterBankParams& p);

// Number of grid positions dense_descriptors produces.
std::size_t dense_grid_count(int width, int height, const FilterBankParams& p);

// One descriptor centred on every pixel (stride 1, edge replication), in
// row-major pixel order.
DescriptorSet pixel_descriptors(const Image& img, const FilterBankParams& p);

// "NZRD" file: magic, u16 version, u32 N, u32 D, N (x, y) u32 pairs, then
// N*D float32 row-major, little-endian.
std::vector<std::uint8_t> encode_descriptors(const DescriptorSet& ds);
DescriptorSet decode_descriptors(std::span<const std::uint8_t> bytes);
void write_descriptors(const DescriptorSet& ds,
                       const std::filesystem::path& path);
DescriptorSet read_descriptors(const std::filesystem::path& path);

}  // namespace nazr
