#include "nazr/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"

namespace nazr {

const char* class_name(int label) {
  switch (label) {
    case 0: return "background";
    case 1: return "mild";
    case 2: return "medium";
    case 3: return "severe";
  }
  return "invalid";
}

int parse_damage_label(const std::string& name) {
  if (name == "mild") return 1;
  if (name == "medium") return 2;
  if (name == "severe") return 3;
  throw DataError("unknown damage label '" + name + "'");
}

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {}

float Image::gray(int x, int y) const {
  if (channels == 1) return at(x, y);
  return 0.299f * at(x, y, 0) + 0.587f * at(x, y, 1) + 0.114f * at(x, y, 2);
}

void Image::validate() const {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw DataError("image has invalid dimensions or channel count");
  }
  if (data.size() != pixel_count() * channels) {
    throw DataError("image data length does not match dimensions");
  }
  for (float v : data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw DataError("image value outside [0,1]");
    }
  }
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = img.gray(x, y);
  return out;
}

LabelMap::LabelMap(int w, int h, std::uint8_t fill)
    : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& bytes,
                           const std::filesystem::path& path) {
  PnmHeader h;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    throw DataError(path.string() + ": " + why);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    fail("not a binary PGM/PPM file");
  }
  h.kind = static_cast<char>(bytes[1]);
  pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("bad header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++pos;
    }
    return static_cast<int>(v);
  };
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("bad header");
  ++pos;
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 255) {
    fail("unsupported dimensions or maxval (8-bit only)");
  }
  h.offset = pos;
  std::size_t channels = h.kind == '6' ? 3 : 1;
  std::size_t need = static_cast<std::size_t>(h.width) * h.height * channels;
  if (bytes.size() - pos < need) fail("truncated pixel data");
  return h;
}

void write_pnm_bytes(const std::filesystem::path& path, char kind, int w,
                     int h, const std::vector<std::uint8_t>& pixels) {
  std::string header = std::string("P") + kind + "\n" + std::to_string(w) +
                       " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_file_bytes(path, bytes);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  PnmHeader h = parse_pnm_header(bytes, path);
  int channels = h.kind == '6' ? 3 : 1;
  Image img(h.width, h.height, channels);
  float scale = 1.0f / static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    float v = static_cast<float>(bytes[h.offset + i]) * scale;
    img.data[i] = v > 1.0f ? 1.0f : v;
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> pixels(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    float v = img.data[i] < 0.0f ? 0.0f : (img.data[i] > 1.0f ? 1.0f : img.data[i]);
    pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  write_pnm_bytes(path, img.channels == 3 ? '6' : '5', img.width, img.height,
                  pixels);
}

LabelMap read_label_map(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  PnmHeader h = parse_pnm_header(bytes, path);
  if (h.kind != '5') throw DataError(path.string() + ": label map must be P5");
  LabelMap lm(h.width, h.height);
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    std::uint8_t v = bytes[h.offset + i];
    if (v >= kNumClasses) {
      throw DataError(path.string() + ": label value out of range");
    }
    lm.labels[i] = v;
  }
  return lm;
}

void write_label_map(const std::filesystem::path& path, const LabelMap& lm) {
  write_pnm_bytes(path, '5', lm.width, lm.height, lm.labels);
}

}  // namespace nazr
