#include "nazr/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <limits>

namespace nazr {

static_assert(std::endian::native == std::endian::little,
              "byte codecs assume a little-endian host");

namespace {

template <class T>
void append_raw(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T load_raw(std::span<const std::uint8_t> s) {
  T v;
  std::memcpy(&v, s.data(), sizeof(T));
  return v;
}

}  // namespace

void ByteWriter::magic(std::string_view four_cc) {
  bytes_.insert(bytes_.end(), four_cc.begin(), four_cc.end());
}
void ByteWriter::u16(std::uint16_t v) { append_raw(bytes_, v); }
void ByteWriter::u32(std::uint32_t v) { append_raw(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { append_raw(bytes_, v); }
void ByteWriter::f32(float v) { append_raw(bytes_, v); }
void ByteWriter::f64(double v) { append_raw(bytes_, v); }

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (remaining() < n) {
    throw FormatError(FormatFault::kTruncated, "unexpected end of payload");
  }
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(std::string_view four_cc) {
  if (remaining() < four_cc.size()) {
    throw FormatError(FormatFault::kBadMagic,
                      "file too short for magic '" + std::string(four_cc) + "'");
  }
  auto s = take(four_cc.size());
  if (std::string_view(reinterpret_cast<const char*>(s.data()), s.size()) !=
      four_cc) {
    throw FormatError(FormatFault::kBadMagic,
                      "bad magic, expected '" + std::string(four_cc) + "'");
  }
}

std::uint16_t ByteReader::u16() { return load_raw<std::uint16_t>(take(2)); }
std::uint32_t ByteReader::u32() { return load_raw<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return load_raw<std::uint64_t>(take(8)); }
float ByteReader::f32() { return load_raw<float>(take(4)); }
double ByteReader::f64() { return load_raw<double>(take(8)); }

void ByteReader::require(std::uint64_t count, const char* what) const {
  if (remaining() < count) {
    throw FormatError(FormatFault::kTruncated,
                      std::string("truncated payload: ") + what);
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatFault::kIo, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError(FormatFault::kIo, "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FormatError(FormatFault::kIo, "write failed for " + path.string());
  }
}

std::uint64_t checked_payload_bytes(std::uint64_t a, std::uint64_t b,
                                    std::uint64_t element_size,
                                    std::uint64_t limit) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  if (a != 0 && b > kMax / a) {
    throw FormatError(FormatFault::kOverflow, "element count overflows");
  }
  std::uint64_t n = a * b;
  if (element_size != 0 && n > kMax / element_size) {
    throw FormatError(FormatFault::kOverflow, "payload size overflows");
  }
  n *= element_size;
  if (n > limit) {
    throw FormatError(FormatFault::kOverflow,
                      "declared payload exceeds the size limit");
  }
  return n;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace nazr
