#pragma once

#include <algorithm>
#include <cstdint>

namespace xmc {

// Pixel box [x_min, x_max) x [y_min, y_max).
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  std::int64_t area() const {
    return x_max > x_min && y_max > y_min ? static_cast<std::int64_t>(width()) * height() : 0;
  }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool within(int image_w, int image_h) const {
    return valid() && x_min >= 0 && y_min >= 0 && x_max <= image_w && y_max <= image_h;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = std::max(a.x_min, b.x_min), y0 = std::max(a.y_min, b.y_min);
  const int x1 = std::min(a.x_max, b.x_max), y1 = std::min(a.y_max, b.y_max);
  if (x1 <= x0 || y1 <= y0) return 0;
  return static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
}

}  // namespace xmc
