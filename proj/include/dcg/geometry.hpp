#pragma once

#include <algorithm>
#include <cstdint>

namespace dcg {

struct Point {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Point, Point) = default;
};

struct PointF {
  double x = 0.0;
  double y = 0.0;

  constexpr Point rounded() const {
    return {static_cast<int>(x < 0 ? x - 0.5 : x + 0.5), static_cast<int>(y < 0 ? y - 0.5 : y + 0.5)};
  }
};

/// Half-open axis-aligned rectangle [left, right) x [top, bottom).
struct Rect {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  static constexpr Rect from_size(int x, int y, int w, int h) { return {x, y, x + w, y + h}; }

  constexpr int width() const { return right - left; }
  constexpr int height() const { return bottom - top; }
  constexpr bool empty() const { return right <= left || bottom <= top; }
  constexpr long area() const { return empty() ? 0L : static_cast<long>(width()) * height(); }

  constexpr bool contains(Point p) const {
    return p.x >= left && p.x < right && p.y >= top && p.y < bottom;
  }
  constexpr bool contains(const Rect& r) const {
    return r.left >= left && r.right <= right && r.top >= top && r.bottom <= bottom;
  }
  constexpr bool intersects(const Rect& r) const {
    return !empty() && !r.empty() && r.left < right && left < r.right && r.top < bottom &&
           top < r.bottom;
  }

  constexpr Rect translated(int dx, int dy) const {
    return {left + dx, top + dy, right + dx, bottom + dy};
  }

  constexpr Rect united(const Rect& r) const {
    if (empty()) return r;
    if (r.empty()) return *this;
    return {std::min(left, r.left), std::min(top, r.top), std::max(right, r.right),
            std::max(bottom, r.bottom)};
  }

  constexpr Rect intersected(const Rect& r) const {
    Rect out{std::max(left, r.left), std::max(top, r.top), std::min(right, r.right),
             std::min(bottom, r.bottom)};
    if (out.empty()) return {};
    return out;
  }

  /// Geometric centre of the pixel block (pixel centres sit at +0.5).
  constexpr PointF center() const {
    return {(left + right) / 2.0, (top + bottom) / 2.0};
  }

  /// Pixel nearest the centre that is still inside the rectangle.
  constexpr Point center_pixel() const { return {left + (width() - 1) / 2, top + (height() - 1) / 2}; }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace dcg
