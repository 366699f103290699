#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nazr/descriptors.hpp"
#include "nazr/image.hpp"

namespace nazr {

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

// An 8-connected region of one class.
struct SegmentRecord {
  int id = 0;
  int grid_width = 0;
  int grid_height = 0;
  std::vector<std::uint32_t> pixels;  // linear indices, ascending
  int predicted = 0;                  // class from the stage that produced it
  std::optional<int> gt;              // max-overlap ground-truth class
  bool unencodable = false;           // no descriptors fell inside the mask
  BoundingBox bbox;

  std::size_t area() const { return pixels.size(); }
  PixelMask mask() const;
};

inline constexpr int kDefaultMinArea = 25;

// 8-connected components of every non-background class, dropping those
// smaller than min_area. Ordered by their first pixel in raster order.
std::vector<SegmentRecord> extract_segments(const LabelMap& lm,
                                            int min_area = kDefaultMinArea);

// Class (background included) with the largest pixel overlap; ties go to the
// more severe class.
int assign_gt_label(const SegmentRecord& seg, const LabelMap& gt);

// Descriptors whose centre pixel lies in the segment, or nullopt when none do.
std::optional<DescriptorSet> crop_segment(const SegmentRecord& seg,
                                          const DescriptorSet& ds);

// {"image_id", "segment_id", "class", "area", "bbox": [x0, y0, x1, y1]}
std::string segment_json_line(const std::string& image_id,
                              const SegmentRecord& seg);

// Paints every segment with its predicted class onto a background map.
LabelMap paint_segments(int width, int height,
                        const std::vector<SegmentRecord>& segments);

}  // namespace nazr
