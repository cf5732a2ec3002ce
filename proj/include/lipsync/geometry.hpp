#pragma once

// Landmark normalization: mouth-centred translation, in-plane rotation removal
// and scale removal, plus the exact inverse onto a target frame.
//
// Indexing follows the usual 68-point annotation. Public documentation uses
// 1-based numbers (mouth = 49..68, outer lip 49..60, inner lip 61..68); the
// arrays are 0-based, so mouth point 49 lives at index 48.

#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include "lipsync/error.hpp"

namespace lipsync {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

/// Counter-clockwise in a y-up frame; in image coordinates (y down) this turns
/// +x towards +y, which is the same convention atan2(dy, dx) measures.
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

inline constexpr std::size_t kNumLandmarks = 68;
inline constexpr std::size_t kMouthBegin = 48;  // point 49
inline constexpr std::size_t kNumMouth = 20;
inline constexpr std::size_t kInnerLipBegin = 60;  // point 61
inline constexpr std::size_t kMouthLeftCorner = 48;   // point 49
inline constexpr std::size_t kMouthRightCorner = 54;  // point 55
inline constexpr std::size_t kMouthShapeDim = 2 * kNumMouth;

using MouthPoints = std::array<Vec2, kNumMouth>;

/// 68 image-space points, x to the right and y down, in pixels.
struct Landmarks68 {
  std::array<Vec2, kNumLandmarks> points{};

  Vec2& operator[](std::size_t i) { return points[i]; }
  const Vec2& operator[](std::size_t i) const { return points[i]; }

  /// Point by 1-based annotation number (1..68).
  const Vec2& annotated(std::size_t number) const { return points.at(number - 1); }

  MouthPoints mouth() const {
    MouthPoints m{};
    for (std::size_t i = 0; i < kNumMouth; ++i) m[i] = points[kMouthBegin + i];
    return m;
  }

  void set_mouth(const MouthPoints& m) {
    for (std::size_t i = 0; i < kNumMouth; ++i) points[kMouthBegin + i] = m[i];
  }

  bool finite() const {
    for (const auto& p : points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    return true;
  }
};

/// The similarity frame removed by normalize() and re-applied by denormalize().
struct NormalizationParams {
  Vec2 center;
  double theta = 0.0;  // radians, (-pi, pi]
  double scale = 1.0;  // pixels
};

/// 40 values [x49, y49, ..., x68, y68] of the normalized mouth.
using MouthShape40 = std::array<double, kMouthShapeDim>;

struct NormalizedFace {
  std::array<Vec2, kNumLandmarks> vectors{};
  NormalizationParams params;
};

inline Vec2 mouth_center(const Landmarks68& lm) {
  Vec2 c{};
  for (std::size_t i = kMouthBegin; i < kNumLandmarks; ++i) c = c + lm[i];
  return (1.0 / static_cast<double>(kNumMouth)) * c;
}

/// center = mean of points 49..68; theta = direction of 49 -> 55;
/// scale = Frobenius norm of the 68 centre-subtracted vectors.
inline NormalizationParams estimate_frame(const Landmarks68& lm) {
  if (!lm.finite()) throw Error(ErrorCode::BadArgument, "landmarks contain non-finite values");
  NormalizationParams p;
  p.center = mouth_center(lm);

  const Vec2 axis = lm[kMouthRightCorner] - lm[kMouthLeftCorner];
  if (axis.x == 0.0 && axis.y == 0.0)
    throw Error(ErrorCode::DegenerateFace, "mouth corners coincide");
  p.theta = wrap_angle(std::atan2(axis.y, axis.x));

  double sum_sq = 0.0;
  for (const auto& q : lm.points) {
    const Vec2 v = q - p.center;
    sum_sq += v.x * v.x + v.y * v.y;
  }
  p.scale = std::sqrt(sum_sq);
  if (p.scale < 1e-12) throw Error(ErrorCode::DegenerateFace, "landmark scale is zero");
  return p;
}

inline NormalizedFace normalize(const Landmarks68& lm) {
  NormalizedFace out;
  out.params = estimate_frame(lm);
  const double inv = 1.0 / out.params.scale;
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    out.vectors[i] = inv * rotate(lm[i] - out.params.center, -out.params.theta);
  return out;
}

inline MouthShape40 mouth_shape(const NormalizedFace& face) {
  MouthShape40 v{};
  for (std::size_t i = 0; i < kNumMouth; ++i) {
    v[2 * i] = face.vectors[kMouthBegin + i].x;
    v[2 * i + 1] = face.vectors[kMouthBegin + i].y;
  }
  return v;
}

inline MouthShape40 mouth_shape(const Landmarks68& lm) { return mouth_shape(normalize(lm)); }

/// p_i = scale * R(theta) * v_i + center, for the 20 mouth points.
inline MouthPoints denormalize(std::span<const double, kMouthShapeDim> shape,
                               const NormalizationParams& params) {
  if (!(params.scale > 0.0)) throw Error(ErrorCode::BadArgument, "denormalize needs scale > 0");
  MouthPoints out{};
  for (std::size_t i = 0; i < kNumMouth; ++i) {
    const Vec2 v{shape[2 * i], shape[2 * i + 1]};
    out[i] = params.scale * rotate(v, params.theta) + params.center;
  }
  return out;
}

}  // namespace lipsync
