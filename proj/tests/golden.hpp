#pragma once

// Conditioned-input golden: a fixed synthetic face, blanked and outlined by
// the test-side oracle rasterizer only.

#include "support.hpp"

namespace testing_support {

inline lipsync::FaceParams golden_face_params() {
  lipsync::FaceParams fp;
  fp.mouth_open = 0.6;
  fp.mouth_wide = 0.7;
  fp.smile = 0.4;
  fp.jaw = 0.3;
  fp.asymmetry = -0.5;
  fp.center = {31.3, 33.1};
  fp.rotation = 0.12;
  fp.scale = 25.0;
  return fp;
}

/// Box from the hand formula: floor(min - e*w) .. floor(max + e*w) + 1, clamped.
inline std::array<int, 4> oracle_bbox(const lipsync::MouthPoints& m, double expand, int w, int h) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : m) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double ex = expand * (x1 - x0), ey = expand * (y1 - y0);
  return {std::clamp(static_cast<int>(std::floor(x0 - ex)), 0, w), std::clamp(static_cast<int>(std::floor(y0 - ey)), 0, h),
          std::clamp(static_cast<int>(std::floor(x1 + ex)) + 1, 0, w),
          std::clamp(static_cast<int>(std::floor(y1 + ey)) + 1, 0, h)};
}

inline lipsync::Image oracle_conditioned_input(const lipsync::Image& frame, const lipsync::MouthPoints& mouth,
                                               double expand) {
  lipsync::Image out = frame;
  const auto b = oracle_bbox(mouth, expand, frame.width(), frame.height());
  for (int y = b[1]; y < b[3]; ++y)
    for (int x = b[0]; x < b[2]; ++x) out.set_pixel(x, y, {0.0, 0.0, 0.0});
  for (const auto& [x, y] : oracle_outline(mouth, frame.width(), frame.height())) out.set_pixel(x, y, {1.0, 1.0, 1.0});
  return out;
}

}  // namespace testing_support
