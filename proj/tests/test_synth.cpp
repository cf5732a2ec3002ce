#include <gtest/gtest.h>

#include "support.hpp"

using namespace lipsync;

TEST(SynthFaces, NeutralFaceIsMirrorSymmetric) {
  const Landmarks68 lm = face_landmarks(FaceParams{});
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const Vec2 a = lm[i];
    const Vec2 b = lm[face_layout::kMirror[i]];
    EXPECT_NEAR(a.x - 32.0, 32.0 - b.x, 1e-9) << "point " << i + 1;
    EXPECT_NEAR(a.y, b.y, 1e-9) << "point " << i + 1;
  }
}

TEST(SynthFaces, MirrorTableIsAnInvolution) {
  for (std::size_t i = 0; i < kNumLandmarks; ++i) EXPECT_EQ(face_layout::kMirror[face_layout::kMirror[i]], i);
}

TEST(SynthFaces, RotationIsAboutCenter) {
  FaceParams fp;
  fp.mouth_open = 0.4;
  fp.smile = 0.3;
  const Landmarks68 base = face_landmarks(fp);
  fp.rotation = 0.37;
  const Landmarks68 rot = face_landmarks(fp);
  const double c = std::cos(0.37), s = std::sin(0.37);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const double x = base[i].x - 32.0, y = base[i].y - 32.0;
    EXPECT_NEAR(rot[i].x, 32.0 + c * x - s * y, 1e-9);
    EXPECT_NEAR(rot[i].y, 32.0 + s * x + c * y, 1e-9);
  }
}

TEST(SynthFaces, SimilarityCovariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    FaceParams fp = sample_face_params(rng, 5, {});
    const Landmarks68 base = face_landmarks(fp);
    const double alpha = uniform(rng, 0.5, 1.5), phi = uniform(rng, -1, 1);
    const Vec2 t{uniform(rng, -5, 5), uniform(rng, -5, 5)};
    FaceParams moved = fp;
    moved.center = fp.center + t;
    moved.rotation = fp.rotation + phi;
    moved.scale = fp.scale * alpha;
    const Landmarks68 got = face_landmarks(moved);
    // about the original centre: p' = c + t + alpha R(phi) (p - c)
    const double c = std::cos(phi), s = std::sin(phi);
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      const double x = base[i].x - fp.center.x, y = base[i].y - fp.center.y;
      EXPECT_NEAR(got[i].x, fp.center.x + t.x + alpha * (c * x - s * y), 1e-9);
      EXPECT_NEAR(got[i].y, fp.center.y + t.y + alpha * (s * x + c * y), 1e-9);
    }
  }
}

TEST(SynthFaces, InnerGapFollowsLayoutFormula) {
  FaceParams closed, open;
  open.mouth_open = 1.0;
  const double s = closed.scale;
  // 63 -> 67 distance at f = 0 is (0.02 + 0.20 * mouth_open) face units
  const auto gap = [&](const FaceParams& fp) { return face_landmarks(fp).annotated(67).y - face_landmarks(fp).annotated(63).y; };
  EXPECT_NEAR(gap(closed), s * 0.02, 1e-9);
  EXPECT_NEAR(gap(open), s * 0.22, 1e-9);
  EXPECT_NEAR(gap(open) - gap(closed), s * 0.20, 1e-9);
}

TEST(SynthFaces, MouthLayoutClosedForm) {
  FaceParams fp;
  fp.mouth_open = 0.3;
  fp.mouth_wide = 0.8;
  fp.jaw = 0.5;
  fp.center = {0.0, 0.0};
  fp.scale = 1.0;
  const Landmarks68 lm = face_landmarks(fp);
  const double w = 0.22 + 0.10 * 0.8, g = 0.02 + 0.20 * 0.3, lower = 0.07 + 0.06 * 0.5;
  // corners 49 and 55 on the mouth line, lower-lip middle 58 at the bottom
  EXPECT_NEAR(lm.annotated(49).x, -w, 1e-12);
  EXPECT_NEAR(lm.annotated(55).x, w, 1e-12);
  EXPECT_NEAR(lm.annotated(49).y, 0.42, 1e-12);
  EXPECT_NEAR(lm.annotated(52).y, 0.42 - (g / 2 + 0.06), 1e-12);
  EXPECT_NEAR(lm.annotated(58).y, 0.42 + g / 2 + lower, 1e-12);
  EXPECT_NEAR(lm.annotated(61).x, -0.75 * w, 1e-12);
}

TEST(SynthFaces, SameSeedIsBitIdentical) {
  const auto a = sample_corpus(0, 2, 5);
  const auto b = sample_corpus(0, 2, 5);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].landmarks.points, b[i].landmarks.points);
  }
  const auto c = sample_corpus(1, 2, 5);
  EXPECT_NE(a[0].landmarks.points, c[0].landmarks.points);
}

TEST(SynthFaces, RejectsBadArguments) {
  EXPECT_THROW(sample_corpus(0, 0, 5), Error);
  EXPECT_THROW(sample_corpus(0, 3, 0), Error);
  EXPECT_THROW(sample_corpus(0, 3, 6), Error);
  FaceParams off;
  off.center = {5.0, 32.0};
  try {
    render_face(off);
    FAIL() << "expected OutOfFrame";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfFrame);
  }
}

TEST(SynthFaces, OneLatentIsOneDimensional) {
  CorpusOptions opt;
  opt.render_images = false;
  const auto corpus = sample_corpus(5, 300, 1, opt);
  Eigen::MatrixXd x(300, kMouthShapeDim);
  for (int i = 0; i < 300; ++i) {
    const auto s = mouth_shape(corpus[static_cast<std::size_t>(i)].landmarks);
    for (std::size_t j = 0; j < kMouthShapeDim; ++j) x(i, static_cast<Eigen::Index>(j)) = s[j];
  }
  EXPECT_GT(fit_pca(x, 1).explained_ratio(0), 0.999);
}

TEST(SynthFaces, RenderedImageIsQuantizedAndInRange) {
  const auto s = render_face(FaceParams{});
  EXPECT_EQ(s.image.width(), 64);
  EXPECT_EQ(s.image, quantize8(s.image));
  for (double v : s.image.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  // mouth region is drawn in lip colour somewhere near the mouth centre
  const Vec2 c = mouth_center(s.landmarks);
  const Rgb lip = s.image.pixel(static_cast<int>(c.x), static_cast<int>(c.y - 0.9));
  EXPECT_NE(lip, palette::kSkin);
}
