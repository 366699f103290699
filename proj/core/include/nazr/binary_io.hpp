#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nazr/error.hpp"

namespace nazr {

// Little-endian byte writer for the NZR* container formats.
class ByteWriter {
 public:
  void magic(std::string_view four_cc);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian reader. Every read past the end throws
// FormatError(kTruncated).
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view four_cc);
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  std::size_t remaining() const { return bytes_.size() - pos_; }
  // Throws kTruncated unless `count` more bytes are available.
  void require(std::uint64_t count, const char* what) const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

// Multiplies element counts, throwing FormatError(kOverflow) when the product
// (times `element_size`) does not fit in 64 bits or exceeds `limit` bytes.
std::uint64_t checked_payload_bytes(std::uint64_t a, std::uint64_t b,
                                    std::uint64_t element_size,
                                    std::uint64_t limit);

// 64-bit FNV-1a. Stable across platforms; used for config and file hashes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

std::string hex64(std::uint64_t v);

}  // namespace nazr
