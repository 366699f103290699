#include "nazr/segments.hpp"

#include <algorithm>
#include <array>

#include "json.hpp"
#include "nazr/error.hpp"

namespace nazr {

PixelMask SegmentRecord::mask() const {
  PixelMask m(grid_width, grid_height);
  for (auto p : pixels) m.bits[p] = 1;
  return m;
}

std::vector<SegmentRecord> extract_segments(const LabelMap& lm, int min_area) {
  const int w = lm.width, h = lm.height;
  std::vector<std::uint8_t> visited(lm.pixel_count(), 0);
  std::vector<SegmentRecord> out;
  std::vector<std::uint32_t> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      const std::uint8_t cls = lm.labels[start];
      if (cls == 0 || visited[start]) continue;
      SegmentRecord seg;
      seg.grid_width = w;
      seg.grid_height = h;
      seg.predicted = cls;
      seg.bbox = {x0, y0, x0, y0};
      visited[start] = 1;
      stack.assign(1, static_cast<std::uint32_t>(start));
      while (!stack.empty()) {
        const std::uint32_t p = stack.back();
        stack.pop_back();
        seg.pixels.push_back(p);
        const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
        seg.bbox.x0 = std::min(seg.bbox.x0, px);
        seg.bbox.y0 = std::min(seg.bbox.y0, py);
        seg.bbox.x1 = std::max(seg.bbox.x1, px);
        seg.bbox.y1 = std::max(seg.bbox.y1, py);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx, ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
            if (visited[q] || lm.labels[q] != cls) continue;
            visited[q] = 1;
            stack.push_back(static_cast<std::uint32_t>(q));
          }
        }
      }
      if (static_cast<int>(seg.pixels.size()) < min_area) continue;
      std::sort(seg.pixels.begin(), seg.pixels.end());
      seg.id = static_cast<int>(out.size());
      out.push_back(std::move(seg));
    }
  }
  return out;
}

int assign_gt_label(const SegmentRecord& seg, const LabelMap& gt) {
  if (gt.width != seg.grid_width || gt.height != seg.grid_height) {
    throw DataError("segment and ground truth grids differ");
  }
  std::array<std::size_t, kNumClasses> overlap{};
  for (auto p : seg.pixels) ++overlap[gt.labels[p]];
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (overlap[c] >= overlap[best]) best = c;
  }
  return best;
}

std::optional<DescriptorSet> crop_segment(const SegmentRecord& seg,
                                          const DescriptorSet& ds) {
  const PixelMask mask = seg.mask();
  DescriptorSet out(ds.dim);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (mask.contains(static_cast<int>(ds.xs[i]), static_cast<int>(ds.ys[i]))) {
      out.append_from(ds, i);
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string segment_json_line(const std::string& image_id,
                              const SegmentRecord& seg) {
  nlohmann::ordered_json j;
  j["image_id"] = image_id;
  j["segment_id"] = seg.id;
  j["class"] = class_name(seg.predicted);
  j["area"] = seg.area();
  j["bbox"] = {seg.bbox.x0, seg.bbox.y0, seg.bbox.x1, seg.bbox.y1};
  return j.dump();
}

LabelMap paint_segments(int width, int height,
                        const std::vector<SegmentRecord>& segments) {
  LabelMap lm(width, height);
  for (const auto& s : segments) {
    for (auto p : s.pixels) lm.labels[p] = static_cast<std::uint8_t>(s.predicted);
  }
  return lm;
}

}  // namespace nazr
