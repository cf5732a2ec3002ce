#pragma once

// Integer rasterization helpers. No anti-aliasing anywhere: every pixel is
// either written with the full colour or left alone, so outputs are bit-exact.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <vector>

#include "lipsync/geometry.hpp"
#include "lipsync/image.hpp"

namespace lipsync {

struct Pixel {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(Pixel, Pixel) = default;
  friend constexpr auto operator<=>(Pixel, Pixel) = default;
};

/// Pixel containing a continuous point (pixel (i, j) covers [i, i+1) x [j, j+1)).
inline Pixel pixel_of(Vec2 p) {
  return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}

inline Pixel clamp_pixel(Pixel p, int width, int height) {
  return {std::clamp(p.x, 0, width - 1), std::clamp(p.y, 0, height - 1)};
}

/// Bresenham stepping along the major axis. At step i the minor offset is the
/// integer nearest to i*minor/major, with exact halves rounded towards the
/// start point. Both endpoints are visited.
template <typename Plot>
void bresenham(Pixel a, Pixel b, Plot&& plot) {
  const int dx = std::abs(b.x - a.x);
  const int dy = std::abs(b.y - a.y);
  const int sx = b.x >= a.x ? 1 : -1;
  const int sy = b.y >= a.y ? 1 : -1;
  int x = a.x;
  int y = a.y;
  if (dx >= dy) {
    int err = 2 * dy - dx;
    for (int i = 0; i <= dx; ++i) {
      plot(x, y);
      if (err > 0) {
        y += sy;
        err -= 2 * dx;
      }
      err += 2 * dy;
      x += sx;
    }
  } else {
    int err = 2 * dx - dy;
    for (int i = 0; i <= dy; ++i) {
      plot(x, y);
      if (err > 0) {
        x += sx;
        err -= 2 * dy;
      }
      err += 2 * dx;
      y += sy;
    }
  }
}

/// Closed polyline p0 -> p1 -> ... -> p(n-1) -> p0, one pixel wide.
inline void draw_closed_polyline(Image& canvas, std::span<const Vec2> points, const Rgb& color) {
  const std::size_t n = points.size();
  if (n == 0) return;
  auto plot = [&](int x, int y) {
    if (canvas.contains(x, y)) canvas.set_pixel(x, y, color);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel a = clamp_pixel(pixel_of(points[i]), canvas.width(), canvas.height());
    const Pixel b = clamp_pixel(pixel_of(points[(i + 1) % n]), canvas.width(), canvas.height());
    bresenham(a, b, plot);
  }
}

/// Even-odd point-in-polygon test.
inline bool inside_polygon(std::span<const Vec2> poly, double px, double py) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double xc = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < xc) inside = !inside;
    }
  }
  return inside;
}

/// Fills every pixel whose centre lies inside the polygon.
inline void fill_polygon(Image& canvas, std::span<const Vec2> poly, const Rgb& color) {
  if (poly.size() < 3) return;
  double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
  for (const auto& p : poly) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
  const int x1 = std::min(canvas.width() - 1, static_cast<int>(std::ceil(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
  const int y1 = std::min(canvas.height() - 1, static_cast<int>(std::ceil(max_y)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (inside_polygon(poly, x + 0.5, y + 0.5)) canvas.set_pixel(x, y, color);
}

}  // namespace lipsync
