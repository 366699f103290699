#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nazr {

// Damage taxonomy. Numeric order doubles as severity order.
enum class DamageClass : std::uint8_t {
  kBackground = 0,
  kMild = 1,
  kMedium = 2,
  kSevere = 3,
};

inline constexpr int kNumClasses = 4;

const char* class_name(int label);
// "mild" | "medium" | "severe" -> class index. Throws DataError otherwise.
int parse_damage_label(const std::string& name);

// Intensities in [0,1], row-major, channel-interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
  // Luminance for RGB, identity for gray.
  float gray(int x, int y) const;
  // Throws DataError when dimensions or values violate the invariants.
  void validate() const;
};

Image to_gray(const Image& img);

// Per-pixel class index: 0 background, 1 mild, 2 medium, 3 severe.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
  bool same_grid(const LabelMap& other) const {
    return width == other.width && height == other.height;
  }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// Binary membership mask over an image grid.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  PixelMask() = default;
  PixelMask(int w, int h, bool fill = false)
      : width(w), height(h),
        bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
};

// Binary PPM (P6) / PGM (P5), 8-bit. Values are scaled to [0,1] on load.
Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& img);

// Label maps are stored as P5 with raw class indices as sample values.
LabelMap read_label_map(const std::filesystem::path& path);
void write_label_map(const std::filesystem::path& path, const LabelMap& lm);

}  // namespace nazr
