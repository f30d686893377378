#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace zoomin::geometry {

/// Axis-aligned pixel rectangle, origin top-left, half-open: [x1,x2) x [y1,y2).
/// Integer corners keep intersection/union areas exact.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  bool valid() const { return x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2; }
  std::int64_t area() const {
    return static_cast<std::int64_t>(x2 - x1) * static_cast<std::int64_t>(y2 - y1);
  }
  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }

  /// Swaps corners so x1<=x2 and y1<=y2.
  BBox normalized() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct ImageDims {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Intersection area over union area; 0 when disjoint, 1 iff identical.
double iou(const BBox& a, const BBox& b);

/// Mean over predicted boxes of the best IoU against any reference box.
/// Empty-list fixed points: both empty -> 1.0; exactly one side empty -> 0.0.
/// Exactly invariant to permutation of either list (maxima are summed in
/// sorted order).
double iou_reward(std::span<const BBox> predicted, std::span<const BBox> reference);

/// Clips to [0,width] x [0,height]; nullopt when the clipped area is zero.
std::optional<BBox> clamp_box(const BBox& b, const ImageDims& dims);

/// area(b) / (width*height). Expects b already clamped to dims.
double area_fraction(const BBox& b, const ImageDims& dims);

/// Drops every box covering strictly more than `threshold` of the image;
/// survivor order preserved. Idempotent.
std::vector<BBox> purify(std::span<const BBox> boxes, const ImageDims& dims,
                         double threshold = 0.5);

}  // namespace zoomin::geometry
