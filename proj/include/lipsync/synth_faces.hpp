#pragma once

// Parametric cartoon faces with exact 68-point ground truth.
//
// All geometry is defined in a face-local frame (x right, y down, origin at
// the face centre, unit = FaceParams::scale pixels) and mapped to the image by
//     p_image = center + scale * R(rotation) * p_face.
//
// Face-local layout (f is the lip-position fraction, -1 = left corner):
//   jaw 1..17      a = pi*j/16, ( -0.78 cos a, -0.10 + (0.92 + 0.12 jaw) sin a )
//   brows 18..27   x = -0.62 + 0.11k, y = -0.52 - 0.07 sin(pi k/4), mirrored for 23..27
//   nose 28..36    bridge (0, -0.36 + 0.12k); base (-0.14 + 0.07k, 0.08 + 0.03(1 - |k-2|/2))
//   eyes 37..48    6-point lids around (-+0.33, -0.30), half-axes 0.12 x 0.05
//   mouth 49..68   centre (0, 0.42)
//     half width     w  = 0.22 + 0.10 mouth_wide,  inner half width 0.75 w
//     inner gap      g  = 0.02 + 0.20 mouth_open   (63 -> 67 distance at f = 0)
//     lip thickness  upper 0.06, lower 0.07 + 0.06 jaw
//     smile          dy += -0.05 smile f^2          (all mouth points)
//     asymmetry      dy += +0.05 asymmetry f (1 - f^2)  (lower lip only)
//     outer upper    y = -(g/2 + 0.06)(1 - f^2),  f = -1, -2/3, ..., 1     (49..55)
//     outer lower    y = +(g/2 + lower)(1 - f^2), f = 2/3, ..., -2/3       (56..60)
//     inner upper    y = -(g/2)(1 - f^2),         f = -1, -1/2, 0, 1/2, 1  (61..65)
//     inner lower    y = +(g/2)(1 - f^2),         f = 1/2, 0, -1/2         (66..68)
//   Outer lip x = w f, inner lip x = 0.75 w f; y values are offsets from 0.42.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/image.hpp"
#include "lipsync/raster.hpp"

namespace lipsync {

struct FaceParams {
  double mouth_open = 0.0;  // [0, 1]
  double mouth_wide = 0.5;  // [0, 1]
  double smile = 0.0;       // [-1, 1]
  double jaw = 0.0;         // [0, 1]
  double asymmetry = 0.0;   // [-1, 1]
  Vec2 center{32.0, 32.0};
  double rotation = 0.0;
  double scale = 24.0;
  int width = 64;
  int height = 64;
};

struct SyntheticSample {
  Image image;
  Landmarks68 landmarks;
  FaceParams params;
};

namespace face_layout {

inline constexpr Vec2 kMouthCenter{0.0, 0.42};
inline constexpr double kGapBase = 0.02;
inline constexpr double kGapOpen = 0.20;

inline double inner_gap(double mouth_open) { return kGapBase + kGapOpen * mouth_open; }

/// 0-based index of the left/right mirror partner of each point.
inline constexpr std::array<std::size_t, kNumLandmarks> kMirror = [] {
  std::array<std::size_t, kNumLandmarks> m{};
  for (std::size_t j = 0; j < 17; ++j) m[j] = 16 - j;
  for (std::size_t k = 0; k < 5; ++k) {
    m[17 + k] = 26 - k;
    m[26 - k] = 17 + k;
  }
  for (std::size_t k = 27; k < 31; ++k) m[k] = k;
  for (std::size_t k = 0; k < 5; ++k) m[31 + k] = 35 - k;
  const std::array<std::size_t, 6> left_eye{36, 37, 38, 39, 40, 41};
  const std::array<std::size_t, 6> right_eye{45, 44, 43, 42, 47, 46};
  for (std::size_t k = 0; k < 6; ++k) {
    m[left_eye[k]] = right_eye[k];
    m[right_eye[k]] = left_eye[k];
  }
  // outer lip 49..60: 49<->55, 50<->54, 51<->53, 52 self, 56<->60, 57<->59, 58 self
  const std::array<std::size_t, 12> outer{54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55};
  for (std::size_t k = 0; k < 12; ++k) m[48 + k] = outer[k];
  // inner lip 61..68: 61<->65, 62<->64, 63 self, 66<->68, 67 self
  const std::array<std::size_t, 8> inner{64, 63, 62, 61, 60, 67, 66, 65};
  for (std::size_t k = 0; k < 8; ++k) m[60 + k] = inner[k];
  return m;
}();

/// The 68 points in the face-local frame.
inline std::array<Vec2, kNumLandmarks> local_points(const FaceParams& fp) {
  std::array<Vec2, kNumLandmarks> p{};
  const double pi = std::numbers::pi;

  for (int j = 0; j < 17; ++j) {
    const double a = pi * j / 16.0;
    p[j] = {-0.78 * std::cos(a), -0.10 + (0.92 + 0.12 * fp.jaw) * std::sin(a)};
  }
  for (int k = 0; k < 5; ++k) {
    const Vec2 brow{-0.62 + 0.11 * k, -0.52 - 0.07 * std::sin(pi * k / 4.0)};
    p[17 + k] = brow;
    p[26 - k] = {-brow.x, brow.y};
  }
  for (int k = 0; k < 4; ++k) p[27 + k] = {0.0, -0.36 + 0.12 * k};
  for (int k = 0; k < 5; ++k)
    p[31 + k] = {-0.14 + 0.07 * k, 0.08 + 0.03 * (1.0 - std::abs(k - 2) / 2.0)};

  const double ex = 0.33, ey = -0.30, rx = 0.12, ry = 0.05;
  const std::array<Vec2, 6> lid{Vec2{-rx, 0.0}, {-rx / 3, -ry}, {rx / 3, -ry},
                                {rx, 0.0},      {rx / 3, ry},   {-rx / 3, ry}};
  for (int k = 0; k < 6; ++k) {
    p[36 + k] = Vec2{-ex, ey} + lid[k];
    p[kMirror[36 + k]] = {ex - lid[k].x, ey + lid[k].y};
  }

  const double w = 0.22 + 0.10 * fp.mouth_wide;
  const double wi = 0.75 * w;
  const double g = inner_gap(fp.mouth_open);
  const double upper = 0.06;
  const double lower = 0.07 + 0.06 * fp.jaw;
  auto smile = [&](double f) { return -0.05 * fp.smile * f * f; };
  auto asym = [&](double f) { return 0.05 * fp.asymmetry * f * (1.0 - f * f); };
  auto at = [&](double x, double y) { return kMouthCenter + Vec2{x, y}; };

  for (int k = 0; k < 7; ++k) {  // 49..55
    const double f = -1.0 + k / 3.0;
    p[48 + k] = at(w * f, -(g / 2 + upper) * (1 - f * f) + smile(f));
  }
  for (int k = 0; k < 5; ++k) {  // 56..60
    const double f = 2.0 / 3.0 - k / 3.0;
    p[55 + k] = at(w * f, (g / 2 + lower) * (1 - f * f) + smile(f) + asym(f));
  }
  for (int k = 0; k < 5; ++k) {  // 61..65
    const double f = -1.0 + k / 2.0;
    p[60 + k] = at(wi * f, -(g / 2) * (1 - f * f) + smile(f));
  }
  for (int k = 0; k < 3; ++k) {  // 66..68
    const double f = 0.5 - k / 2.0;
    p[65 + k] = at(wi * f, (g / 2) * (1 - f * f) + smile(f) + asym(f));
  }
  return p;
}

inline Vec2 to_image(const FaceParams& fp, Vec2 local) {
  return fp.center + fp.scale * rotate(local, fp.rotation);
}

}  // namespace face_layout

/// Ground-truth landmarks without rendering the image.
inline Landmarks68 face_landmarks(const FaceParams& fp) {
  const auto local = face_layout::local_points(fp);
  Landmarks68 lm;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) lm[i] = face_layout::to_image(fp, local[i]);
  return lm;
}

inline void validate(const FaceParams& fp) {
  if (fp.width < 32 || fp.height < 32) throw Error(ErrorCode::BadArgument, "image must be at least 32x32");
  if (!(fp.scale > 0.0)) throw Error(ErrorCode::BadArgument, "face scale must be positive");
  if (!(fp.center.x >= 0 && fp.center.x <= fp.width && fp.center.y >= 0 && fp.center.y <= fp.height))
    throw Error(ErrorCode::BadArgument, "face centre outside image");
}

namespace palette {
// Multiples of 1/255 so PPM round trips are lossless.
inline constexpr Rgb kBackground{40 / 255.0, 60 / 255.0, 90 / 255.0};
inline constexpr Rgb kSkin{220 / 255.0, 180 / 255.0, 150 / 255.0};
inline constexpr Rgb kBrow{90 / 255.0, 60 / 255.0, 40 / 255.0};
inline constexpr Rgb kEyeWhite{240 / 255.0, 240 / 255.0, 235 / 255.0};
inline constexpr Rgb kPupil{30 / 255.0, 30 / 255.0, 40 / 255.0};
inline constexpr Rgb kNose{195 / 255.0, 145 / 255.0, 120 / 255.0};
inline constexpr Rgb kLip{175 / 255.0, 70 / 255.0, 80 / 255.0};
inline constexpr Rgb kCavity{70 / 255.0, 20 / 255.0, 35 / 255.0};
}  // namespace palette

inline SyntheticSample render_face(const FaceParams& fp) {
  validate(fp);
  SyntheticSample s;
  s.params = fp;
  s.landmarks = face_landmarks(fp);
  for (const auto& q : s.landmarks.points)
    if (!(q.x >= 0 && q.y >= 0 && q.x <= fp.width && q.y <= fp.height))
      throw Error(ErrorCode::OutOfFrame, "landmark falls outside the image");

  const auto local = face_layout::local_points(fp);
  auto map = [&](const std::vector<Vec2>& pts) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& q : pts) out.push_back(face_layout::to_image(fp, q));
    return out;
  };
  auto slice = [&](std::size_t first, std::size_t count) {
    return std::vector<Vec2>(local.begin() + first, local.begin() + first + count);
  };

  Image img(fp.width, fp.height, palette::kBackground);

  // skin: jaw line closed over the forehead
  std::vector<Vec2> head = slice(0, 17);
  for (int k = 1; k < 12; ++k) {
    const double a = std::numbers::pi * k / 12.0;
    head.push_back({0.78 * std::cos(a), -0.10 - 0.85 * std::sin(a)});
  }
  fill_polygon(img, map(head), palette::kSkin);

  for (std::size_t start : {17u, 22u}) {
    std::vector<Vec2> brow = slice(start, 5);
    for (int k = 4; k >= 0; --k) brow.push_back(local[start + k] + Vec2{0.0, 0.06});
    fill_polygon(img, map(brow), palette::kBrow);
  }

  std::vector<Vec2> nose{local[27], local[35], local[34], local[33], local[32], local[31]};
  fill_polygon(img, map(nose), palette::kNose);

  for (std::size_t start : {36u, 42u}) {
    fill_polygon(img, map(slice(start, 6)), palette::kEyeWhite);
    Vec2 c{};
    for (std::size_t k = 0; k < 6; ++k) c = c + local[start + k];
    c = (1.0 / 6.0) * c;
    const double r = 0.045;
    fill_polygon(img, map({c + Vec2{-r, -r}, c + Vec2{r, -r}, c + Vec2{r, r}, c + Vec2{-r, r}}),
                 palette::kPupil);
  }

  fill_polygon(img, map(slice(48, 12)), palette::kLip);
  fill_polygon(img, map(slice(60, 8)), palette::kCavity);

  s.image = std::move(img);
  return s;
}

/// Deterministic uniform double in [0, 1) from a 64-bit engine.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * unit_uniform(rng);
}

/// Mouth latents in a fixed order; the first `latent_dims` vary in sample_corpus.
enum class MouthLatent { Open = 0, Wide = 1, Smile = 2, Jaw = 3, Asymmetry = 4 };

struct CorpusOptions {
  int width = 64;
  int height = 64;
  double center_jitter = 3.0;   // pixels
  double max_rotation = 0.25;   // radians
  double scale_min = 23.0;
  double scale_max = 27.0;
  bool render_images = true;
};

/// Draws one set of face parameters. The first `latent_dims` mouth latents are
/// sampled uniformly over their full range; the rest stay neutral.
inline FaceParams sample_face_params(std::mt19937_64& rng, int latent_dims, const CorpusOptions& opt) {
  FaceParams fp;
  fp.width = opt.width;
  fp.height = opt.height;
  if (latent_dims > 0) fp.mouth_open = unit_uniform(rng);
  if (latent_dims > 1) fp.mouth_wide = unit_uniform(rng);
  if (latent_dims > 2) fp.smile = uniform(rng, -1.0, 1.0);
  if (latent_dims > 3) fp.jaw = unit_uniform(rng);
  if (latent_dims > 4) fp.asymmetry = uniform(rng, -1.0, 1.0);
  fp.center = {opt.width / 2.0 + uniform(rng, -opt.center_jitter, opt.center_jitter),
               opt.height / 2.0 + uniform(rng, -opt.center_jitter, opt.center_jitter)};
  fp.rotation = uniform(rng, -opt.max_rotation, opt.max_rotation);
  fp.scale = uniform(rng, opt.scale_min, opt.scale_max);
  return fp;
}

inline std::vector<SyntheticSample> sample_corpus(std::uint64_t seed, int n, int latent_dims,
                                                  const CorpusOptions& opt = {}) {
  if (n < 1) throw Error(ErrorCode::BadArgument, "sample_corpus needs n >= 1");
  if (latent_dims < 1 || latent_dims > 5)
    throw Error(ErrorCode::BadArgument, "latent_dims must be in [1, 5]");
  std::mt19937_64 rng(seed);
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const FaceParams fp = sample_face_params(rng, latent_dims, opt);
    if (opt.render_images) {
      out.push_back(render_face(fp));
    } else {
      validate(fp);
      out.push_back({Image{}, face_landmarks(fp), fp});
    }
  }
  return out;
}

}  // namespace lipsync
