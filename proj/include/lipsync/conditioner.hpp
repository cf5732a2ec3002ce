#pragma once

// Implicit conditioning inputs for the in-painter: blank a box around the
// mouth and draw the outer (49..60) and inner (61..68) lip outlines on it.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/image.hpp"
#include "lipsync/raster.hpp"

namespace lipsync {

/// Half-open pixel box [x0, x1) x [y0, y1).
struct MouthBBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const MouthBBox&, const MouthBBox&) = default;
};

inline constexpr Rgb kBlankValue{0.0, 0.0, 0.0};
inline constexpr Rgb kOutlineValue{1.0, 1.0, 1.0};
inline constexpr double kDefaultBoxExpand = 0.3;

/// Bounds of the 20 mouth points grown by `expand` times the side length on
/// each side, clamped to the image. The lower bound is floor(min); the upper
/// bound is floor(max) + 1, i.e. ceil(max) except when max is an integer, so
/// the pixel holding every mouth point is inside the box.
inline MouthBBox mouth_bbox(const MouthPoints& mouth, double expand, int width, int height) {
  if (!(expand >= 0.0)) throw Error(ErrorCode::BadArgument, "expand must be >= 0");
  double min_x = mouth[0].x, max_x = mouth[0].x, min_y = mouth[0].y, max_y = mouth[0].y;
  for (const auto& p : mouth) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::BadArgument, "non-finite mouth point");
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double ex = expand * (max_x - min_x);
  const double ey = expand * (max_y - min_y);
  MouthBBox b;
  b.x0 = std::clamp(static_cast<int>(std::floor(min_x - ex)), 0, width);
  b.y0 = std::clamp(static_cast<int>(std::floor(min_y - ey)), 0, height);
  b.x1 = std::clamp(static_cast<int>(std::floor(max_x + ex)) + 1, 0, width);
  b.y1 = std::clamp(static_cast<int>(std::floor(max_y + ey)) + 1, 0, height);
  if (b.x0 >= b.x1 || b.y0 >= b.y1) throw Error(ErrorCode::EmptyBox, "mouth box is empty after clamping");
  return b;
}

inline MouthBBox mouth_bbox(const Landmarks68& lm, double expand, int width, int height) {
  return mouth_bbox(lm.mouth(), expand, width, height);
}

/// Outer lip 49..60..49 and inner lip 61..68..61, one pixel wide.
inline void draw_mouth_outline(Image& canvas, const MouthPoints& mouth, const Rgb& color = kOutlineValue) {
  for (const auto& p : mouth)
    if (!(p.x >= 0 && p.y >= 0 && p.x <= canvas.width() && p.y <= canvas.height()))
      throw Error(ErrorCode::OutOfFrame, "mouth point outside the canvas");
  draw_closed_polyline(canvas, std::span<const Vec2>(mouth.data(), 12), color);
  draw_closed_polyline(canvas, std::span<const Vec2>(mouth.data() + 12, 8), color);
}

inline void draw_mouth_outline(Image& canvas, const Landmarks68& lm, const Rgb& color = kOutlineValue) {
  draw_mouth_outline(canvas, lm.mouth(), color);
}

struct ConditionedPair {
  Image input;
  Image target;
  MouthBBox bbox;
};

/// Copies the image, blanks the mouth box and draws the outline of `mouth`.
inline ConditionedPair make_conditioned_pair(const Image& image, const MouthPoints& mouth,
                                             double expand = kDefaultBoxExpand) {
  ConditionedPair pair;
  pair.bbox = mouth_bbox(mouth, expand, image.width(), image.height());
  pair.target = image;
  pair.input = image;
  for (int y = pair.bbox.y0; y < pair.bbox.y1; ++y)
    for (int x = pair.bbox.x0; x < pair.bbox.x1; ++x) pair.input.set_pixel(x, y, kBlankValue);
  draw_mouth_outline(pair.input, mouth);
  return pair;
}

inline ConditionedPair make_conditioned_pair(const Image& image, const Landmarks68& lm,
                                             double expand = kDefaultBoxExpand) {
  return make_conditioned_pair(image, lm.mouth(), expand);
}

}  // namespace lipsync
