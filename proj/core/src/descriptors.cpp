#include "nazr/descriptors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "nazr/binary_io.hpp"
#include "nazr/error.hpp"
#include "nazr/parallel.hpp"

namespace nazr {

namespace {

constexpr std::uint16_t kDescriptorVersion = 1;
constexpr std::uint64_t kMaxDescriptorBytes = 1ULL << 34;

// Derivative and Laplacian responses over the whole image, clamped at the
// border. Each response is a sum of differences so constant regions give
// exactly zero.
struct ResponseMaps {
  int width = 0;
  int height = 0;
  std::vector<double> gray;
  std::vector<double> dx;
  std::vector<double> dy;
  std::vector<double> lap1;
  std::vector<double> lap2;

  explicit ResponseMaps(const Image& img) : width(img.width), height(img.height) {
    const std::size_t n = img.pixel_count();
    gray.resize(n);
    dx.resize(n);
    dy.resize(n);
    lap1.resize(n);
    lap2.resize(n);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) gray[idx(x, y)] = img.gray(x, y);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double c = g(x, y);
        dx[idx(x, y)] = 0.5 * (g(x + 1, y) - g(x - 1, y));
        dy[idx(x, y)] = 0.5 * (g(x, y + 1) - g(x, y - 1));
        lap1[idx(x, y)] = (g(x - 1, y) - c) + (g(x + 1, y) - c) +
                          (g(x, y - 1) - c) + (g(x, y + 1) - c);
        lap2[idx(x, y)] = (g(x - 2, y) - c) + (g(x + 2, y) - c) +
                          (g(x, y - 2) - c) + (g(x, y + 2) - c);
      }
    }
  }

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  double g(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return gray[idx(x, y)];
  }
};

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Descriptor of the patch centred at (cx, cy); samples outside the image are
// replicated from the nearest edge.
void describe_patch(const ResponseMaps& r, int cx, int cy, int patch,
                    std::span<float> out) {
  const int half = patch / 2;
  const int n = patch * patch;
  std::array<double, 9> cell_sum{};
  std::array<int, 9> cell_count{};
  std::array<double, 4> grad{};
  std::array<double, 4> grad_abs{};
  double sum = 0.0, lap1 = 0.0, lap2 = 0.0;

  for (int v = 0; v < patch; ++v) {
    const int y = std::clamp(cy - half + v, 0, r.height - 1);
    const int cell_row = (3 * v) / patch;
    for (int u = 0; u < patch; ++u) {
      const int x = std::clamp(cx - half + u, 0, r.width - 1);
      const std::size_t i = r.idx(x, y);
      const double val = r.gray[i];
      sum += val;
      const int cell = cell_row * 3 + (3 * u) / patch;
      cell_sum[cell] += val;
      ++cell_count[cell];
      const double gx = r.dx[i];
      const double gy = r.dy[i];
      const std::array<double, 4> oriented = {
          gx, kInvSqrt2 * (gx + gy), gy, kInvSqrt2 * (gy - gx)};
      for (int o = 0; o < 4; ++o) {
        grad[o] += oriented[o];
        grad_abs[o] += std::abs(oriented[o]);
      }
      lap1 += std::abs(r.lap1[i]);
      lap2 += std::abs(r.lap2[i]);
    }
  }
  const double mean = sum / n;
  double var = 0.0;
  for (int v = 0; v < patch; ++v) {
    const int y = std::clamp(cy - half + v, 0, r.height - 1);
    for (int u = 0; u < patch; ++u) {
      const int x = std::clamp(cx - half + u, 0, r.width - 1);
      const double d = r.gray[r.idx(x, y)] - mean;
      var += d * d;
    }
  }
  out[FilterBankParams::kMeanIndex] = static_cast<float>(mean);
  for (int c = 0; c < 9; ++c) {
    out[FilterBankParams::kCellBegin + c] =
        static_cast<float>(cell_sum[c] / cell_count[c] - mean);
  }
  for (int o = 0; o < 4; ++o) {
    out[FilterBankParams::kGradientBegin + o] = static_cast<float>(grad[o] / n);
    out[FilterBankParams::kGradientEnergyBegin + o] =
        static_cast<float>(grad_abs[o] / n);
  }
  out[FilterBankParams::kLaplacianBegin] = static_cast<float>(lap1 / n);
  out[FilterBankParams::kLaplacianBegin + 1] = static_cast<float>(lap2 / n);
  out[FilterBankParams::kStdIndex] = static_cast<float>(std::sqrt(var / n));
}

}  // namespace

void DescriptorSet::push_back(std::uint32_t x, std::uint32_t y,
                              std::span<const float> v) {
  if (v.size() != dim) throw DataError("descriptor length does not match dim");
  xs.push_back(x);
  ys.push_back(y);
  values.insert(values.end(), v.begin(), v.end());
}

void DescriptorSet::append_from(const DescriptorSet& other, std::size_t i) {
  push_back(other.xs[i], other.ys[i], other.row(i));
}

bool DescriptorSet::bit_equal(const DescriptorSet& other) const {
  return dim == other.dim && xs == other.xs && ys == other.ys &&
         values.size() == other.values.size() &&
         std::memcmp(values.data(), other.values.data(),
                     values.size() * sizeof(float)) == 0;
}

void FilterBankParams::validate() const {
  if (patch_size < 3 || patch_size % 2 == 0) {
    throw ConfigError("patch_size must be odd and at least 3");
  }
  if (stride < 1) throw ConfigError("stride must be at least 1");
}

std::size_t dense_grid_count(int width, int height, const FilterBankParams& p) {
  if (width < p.patch_size || height < p.patch_size) return 0;
  const std::size_t nx = static_cast<std::size_t>((width - p.patch_size) / p.stride + 1);
  const std::size_t ny = static_cast<std::size_t>((height - p.patch_size) / p.stride + 1);
  return nx * ny;
}

DescriptorSet dense_descriptors(const Image& img, const FilterBankParams& p) {
  p.validate();
  if (img.width < p.patch_size || img.height < p.patch_size) {
    throw ConfigError("image is smaller than the descriptor patch");
  }
  const ResponseMaps maps(img);
  const int nx = (img.width - p.patch_size) / p.stride + 1;
  const int ny = (img.height - p.patch_size) / p.stride + 1;
  const int half = p.patch_size / 2;
  DescriptorSet ds(FilterBankParams::kDim);
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  ds.xs.resize(n);
  ds.ys.resize(n);
  ds.values.resize(n * ds.dim);
  parallel_for(static_cast<std::size_t>(ny), [&](std::size_t gy) {
    for (int gx = 0; gx < nx; ++gx) {
      const std::size_t i = gy * nx + gx;
      const int cx = gx * p.stride + half;
      const int cy = static_cast<int>(gy) * p.stride + half;
      ds.xs[i] = static_cast<std::uint32_t>(cx);
      ds.ys[i] = static_cast<std::uint32_t>(cy);
      describe_patch(maps, cx, cy, p.patch_size,
                     std::span<float>(ds.values.data() + i * ds.dim, ds.dim));
    }
  });
  return ds;
}

DescriptorSet pixel_descriptors(const Image& img, const FilterBankParams& p) {
  p.validate();
  const ResponseMaps maps(img);
  DescriptorSet ds(FilterBankParams::kDim);
  const std::size_t n = img.pixel_count();
  ds.xs.resize(n);
  ds.ys.resize(n);
  ds.values.resize(n * ds.dim);
  parallel_for(static_cast<std::size_t>(img.height), [&](std::size_t y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = y * img.width + x;
      ds.xs[i] = static_cast<std::uint32_t>(x);
      ds.ys[i] = static_cast<std::uint32_t>(y);
      describe_patch(maps, x, static_cast<int>(y), p.patch_size,
                     std::span<float>(ds.values.data() + i * ds.dim, ds.dim));
    }
  });
  return ds;
}

std::vector<std::uint8_t> encode_descriptors(const DescriptorSet& ds) {
  if (ds.values.size() != ds.size() * ds.dim || ds.ys.size() != ds.xs.size()) {
    throw DataError("descriptor set is internally inconsistent");
  }
  ByteWriter w;
  w.magic("NZRD");
  w.u16(kDescriptorVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(ds.dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.u32(ds.xs[i]);
    w.u32(ds.ys[i]);
  }
  for (float v : ds.values) w.f32(v);
  return w.bytes();
}

DescriptorSet decode_descriptors(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("NZRD");
  if (r.u16() != kDescriptorVersion) {
    throw FormatError(FormatFault::kBadVersion, "unsupported NZRD version");
  }
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint64_t coord_bytes = checked_payload_bytes(n, 2, 4, kMaxDescriptorBytes);
  const std::uint64_t value_bytes = checked_payload_bytes(n, d, 4, kMaxDescriptorBytes);
  r.require(coord_bytes + value_bytes, "descriptor payload");
  DescriptorSet ds(d);
  ds.xs.resize(n);
  ds.ys.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.xs[i] = r.u32();
    ds.ys[i] = r.u32();
  }
  ds.values.resize(static_cast<std::size_t>(n) * d);
  for (auto& v : ds.values) v = r.f32();
  return ds;
}

void write_descriptors(const DescriptorSet& ds,
                       const std::filesystem::path& path) {
  write_file_bytes(path, encode_descriptors(ds));
}

DescriptorSet read_descriptors(const std::filesystem::path& path) {
  return decode_descriptors(read_file_bytes(path));
}

}  // namespace nazr
