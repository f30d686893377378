#include "zoomin/geometry.hpp"

#include <algorithm>

namespace zoomin::geometry {

BBox BBox::normalized() const {
  BBox b = *this;
  if (b.x1 > b.x2) std::swap(b.x1, b.x2);
  if (b.y1 > b.y2) std::swap(b.y1, b.y2);
  return b;
}

double iou(const BBox& a, const BBox& b) {
  const std::int64_t ix = std::max<std::int64_t>(
      0, std::int64_t{std::min(a.x2, b.x2)} - std::int64_t{std::max(a.x1, b.x1)});
  const std::int64_t iy = std::max<std::int64_t>(
      0, std::int64_t{std::min(a.y2, b.y2)} - std::int64_t{std::max(a.y1, b.y1)});
  const std::int64_t inter = ix * iy;
  if (inter == 0) return 0.0;
  const std::int64_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_reward(std::span<const BBox> predicted, std::span<const BBox> reference) {
  if (predicted.empty() && reference.empty()) return 1.0;
  if (predicted.empty() || reference.empty()) return 0.0;

  std::vector<double> maxima;
  maxima.reserve(predicted.size());
  for (const BBox& p : predicted) {
    double best = 0.0;
    for (const BBox& r : reference) best = std::max(best, iou(p, r));
    maxima.push_back(best);
  }
  // Canonical summation order makes the mean exactly permutation-invariant.
  std::sort(maxima.begin(), maxima.end());
  double sum = 0.0;
  for (double m : maxima) sum += m;
  return sum / static_cast<double>(maxima.size());
}

std::optional<BBox> clamp_box(const BBox& b, const ImageDims& dims) {
  BBox n = b.normalized();
  BBox c{std::clamp(n.x1, 0, dims.width), std::clamp(n.y1, 0, dims.height),
         std::clamp(n.x2, 0, dims.width), std::clamp(n.y2, 0, dims.height)};
  if (c.x1 >= c.x2 || c.y1 >= c.y2) return std::nullopt;
  return c;
}

double area_fraction(const BBox& b, const ImageDims& dims) {
  return static_cast<double>(b.area()) /
         (static_cast<double>(dims.width) * static_cast<double>(dims.height));
}

std::vector<BBox> purify(std::span<const BBox> boxes, const ImageDims& dims,
                         double threshold) {
  std::vector<BBox> kept;
  kept.reserve(boxes.size());
  for (const BBox& b : boxes) {
    if (area_fraction(b, dims) > threshold) continue;
    kept.push_back(b);
  }
  return kept;
}

}  // namespace zoomin::geometry
