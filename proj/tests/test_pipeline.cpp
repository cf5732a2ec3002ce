#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace lipsync;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

/// Small corpus + dataset + barely trained checkpoints, shared by the render tests.
struct Fixture {
  fs::path root;
  fs::path clip_dir;
  PcaBasis pca;
  PredictorModel kp;
  InpainterModel inp;

  Fixture() {
    root = testing_support::scratch_dir("pipeline");
    SynthClipOptions opt;
    opt.seconds = 4.0;
    clip_dir = root / "clip";
    write_clip_dir(clip_dir, synth_clip(77, opt), opt.fps);
    CorpusManifest manifest;
    manifest.clips.push_back(open_clip_dir(clip_dir));
    build_dataset(manifest, root / "data", {});
    pca = load_pca(root / "data" / "pca_basis.json");
    PredictorConfig kc;
    kc.hidden_size = 8;
    kc.delay_frames = 5;
    kc.epochs = 1;
    kp = train_predictor(load_sequences(root / "data"), kc).model;
    InpainterConfig ic;
    ic.depth = 2;
    ic.base_channels = 4;
    ic.epochs = 1;
    inp = train_inpainter(load_pairs(root / "data"), ic).model;
  }

  RenderInputs inputs(std::string text) const {
    RenderInputs in;
    in.text = std::move(text);
    in.target_clip = clip_dir;
    in.pca = pca;
    in.predictor = kp;
    in.inpainter = inp;
    return in;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(StubTts, DurationAndDeterminism) {
  EXPECT_EQ(stub_tts("ab").samples.size(), 4800u);
  EXPECT_EQ(stub_tts("ab").samples, stub_tts("ab").samples);
  EXPECT_EQ(code_of([] { stub_tts(""); }), ErrorCode::EmptyText);
  const auto silent = stub_tts(" ");
  for (double v : silent.samples) EXPECT_EQ(v, 0.0);
}

TEST(StubTts, LetterPeakAtMappedFrequency) {
  const auto w = stub_tts("a");
  // 'a' maps to 220 Hz; 2400-point DFT bins are 16000/2400 Hz wide
  EXPECT_NEAR(testing_support::dft_peak_hz(w.samples, 16000.0), 220.0, 16000.0 / 2400.0);
  const auto g = stub_tts("g");
  EXPECT_NEAR(testing_support::dft_peak_hz(g.samples, 16000.0), 440.0, 16000.0 / 2400.0);
  EXPECT_EQ(stub_tone_frequency('A'), stub_tone_frequency('a'));
}

TEST(Dataset, OnePairPerSecond) {
  EXPECT_EQ(pair_frame_indices(7500, 25.0, 1.0).size(), 300u);
  const auto idx = pair_frame_indices(100, 25.0, 1.0);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 25, 50, 75}));
}

TEST(Dataset, TenSecondClipFrameCount) {
  const SynthClip clip = synth_clip(3, {});
  EXPECT_EQ(clip.audio.samples.size(), 160000u);
  const int t = extract_features(clip.audio).length();
  EXPECT_LE(std::abs(t - 250), 1);
  EXPECT_EQ(clip.frames.size(), static_cast<std::size_t>(t));
}

TEST(Dataset, EmptyLandmarksLeaveNothingBehind) {
  const fs::path root = testing_support::scratch_dir("empty_landmarks");
  SynthClipOptions opt;
  opt.seconds = 2.0;
  write_clip_dir(root / "clip", synth_clip(4, opt), opt.fps);
  std::ofstream(root / "clip" / "landmarks.jsonl", std::ios::trunc).close();
  CorpusManifest manifest;
  manifest.clips.push_back(open_clip_dir(root / "clip"));
  const ErrorCode code = code_of([&] { build_dataset(manifest, root / "data", {}); });
  EXPECT_TRUE(code == ErrorCode::ParseError || code == ErrorCode::MissingFile);
  EXPECT_FALSE(fs::exists(root / "data"));
  EXPECT_FALSE(testing_support::has_staging_leftovers(root));
}

TEST(Dataset, MismatchedAudioIsAnAlignmentError) {
  const fs::path root = testing_support::scratch_dir("misaligned");
  SynthClipOptions opt;
  opt.seconds = 2.0;
  SynthClip clip = synth_clip(5, opt);
  clip.audio.samples.resize(clip.audio.samples.size() / 2);
  write_clip_dir(root / "clip", clip, opt.fps);
  CorpusManifest manifest;
  manifest.clips.push_back(open_clip_dir(root / "clip"));
  EXPECT_EQ(code_of([&] { build_dataset(manifest, root / "data", {}); }), ErrorCode::AlignmentError);
  EXPECT_FALSE(fs::exists(root / "data"));
}

TEST(Dataset, OutputsAreConsistent) {
  const auto& f = fixture();
  const auto seqs = load_sequences(f.root / "data");
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0].features.cols(), 26);
  EXPECT_EQ(seqs[0].targets.cols(), 5);
  EXPECT_EQ(seqs[0].features.rows(), seqs[0].targets.rows());
  const auto pairs = load_pairs(f.root / "data");
  EXPECT_EQ(pairs.size(), 4u);
  // targets are the clip frames at 0, 25, 50, 75
  EXPECT_EQ(pairs[1].target, read_ppm(f.clip_dir / "frames" / frame_file_name(25)));
  // coefficients are projections of the clip's landmarks
  const auto lms = read_landmarks_jsonl(f.clip_dir / "landmarks.jsonl");
  const auto s = mouth_shape(lms[10]);
  const Eigen::VectorXd c = project(f.pca, Eigen::Map<const Eigen::VectorXd>(s.data(), kMouthShapeDim));
  EXPECT_LT((seqs[0].targets.row(10).transpose() - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Render, ThreeSecondsGiveSeventyFiveFrames) {
  const auto& f = fixture();
  const fs::path out = f.root / "render_3s";
  // 3 s of stub speech is 20 characters
  const RenderManifest m = render_video(f.inputs(std::string(20, 'k')), out);
  EXPECT_EQ(m.frames.size(), 75u);
  EXPECT_TRUE(fs::exists(out / frame_file_name(74)));
  EXPECT_FALSE(fs::exists(out / frame_file_name(75)));
  EXPECT_TRUE(fs::exists(out / "audio.wav"));
  EXPECT_TRUE(verify_outputs(out).ok());
}

TEST(Render, ManifestMatchesIndependentComposition) {
  const auto& f = fixture();
  const fs::path out = f.root / "render_manifest";
  render_video(f.inputs("hello there"), out);
  const auto j = nn::read_json_file(out / "render_manifest.json");
  const PcaBasis basis = load_pca(out / "pca_basis.json");
  for (const auto& fr : j.at("frames")) {
    const auto coeffs = fr.at("coeffs").get<std::vector<double>>();
    const auto center = fr.at("params").at("center").get<std::vector<double>>();
    const double theta = fr.at("params").at("theta").get<double>();
    const double scale = fr.at("params").at("scale").get<double>();
    const auto pts = fr.at("mouth_points_px").get<std::vector<std::vector<double>>>();
    ASSERT_EQ(pts.size(), kNumMouth);
    for (std::size_t i = 0; i < kNumMouth; ++i) {
      double vx = basis.mean[static_cast<Eigen::Index>(2 * i)], vy = basis.mean[static_cast<Eigen::Index>(2 * i + 1)];
      for (std::size_t c = 0; c < coeffs.size(); ++c) {
        vx += coeffs[c] * basis.components(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(2 * i));
        vy += coeffs[c] * basis.components(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(2 * i + 1));
      }
      const double x = scale * (std::cos(theta) * vx - std::sin(theta) * vy) + center[0];
      const double y = scale * (std::sin(theta) * vx + std::cos(theta) * vy) + center[1];
      EXPECT_NEAR(pts[i][0], x, 1e-6);
      EXPECT_NEAR(pts[i][1], y, 1e-6);
    }
  }
}

TEST(Render, EmptyTextWritesNothing) {
  const auto& f = fixture();
  const fs::path out = f.root / "render_empty";
  EXPECT_EQ(code_of([&] { render_video(f.inputs(""), out); }), ErrorCode::EmptyText);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(testing_support::has_staging_leftovers(f.root));
}

TEST(Render, TargetTooShort) {
  const auto& f = fixture();
  const fs::path out = f.root / "render_long";
  EXPECT_EQ(code_of([&] { render_video(f.inputs(std::string(60, 'x')), out); }), ErrorCode::InsufficientTargetFrames);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Render, ParallelEqualsSerialAndVerifyCatchesDamage) {
  const auto& f = fixture();
  const fs::path serial = f.root / "render_serial", parallel = f.root / "render_parallel";
  render_video(f.inputs("the quick fox"), serial);
  RenderInputs in = f.inputs("the quick fox");
  in.workers = 4;
  render_video(in, parallel);
  const auto rep = verify_outputs(serial, parallel);
  EXPECT_TRUE(rep.ok());
  EXPECT_TRUE(rep.compared);
  for (std::size_t i = 0; i < rep.frames_checked; ++i)
    EXPECT_TRUE(testing_support::fs::exists(parallel / frame_file_name(i)));

  fs::remove(parallel / frame_file_name(3));
  const auto broken = verify_outputs(parallel);
  ASSERT_FALSE(broken.ok());
  bool named = false;
  for (const auto& v : broken.violations) named = named || v.find(frame_file_name(3)) != std::string::npos;
  EXPECT_TRUE(named);
}

TEST(Render, VerifyFlagsTamperedManifest) {
  const auto& f = fixture();
  const fs::path out = f.root / "render_tamper";
  render_video(f.inputs("abc"), out);
  auto j = nn::read_json_file(out / "render_manifest.json");
  j["frames"][0]["mouth_points_px"][0][0] = j["frames"][0]["mouth_points_px"][0][0].get<double>() + 1e-3;
  nn::write_json_file(out / "render_manifest.json", j);
  EXPECT_FALSE(verify_outputs(out).ok());
}

TEST(Clip, LandmarkFileRoundTrip) {
  const fs::path root = testing_support::scratch_dir("landmarks");
  std::vector<Landmarks68> frames;
  for (int i = 0; i < 3; ++i) {
    FaceParams fp;
    fp.mouth_open = 0.3 * i;
    frames.push_back(face_landmarks(fp));
  }
  write_landmarks_jsonl(root / "l.jsonl", frames);
  const auto back = read_landmarks_jsonl(root / "l.jsonl");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i].points, frames[i].points);
  std::ofstream(root / "bad.jsonl") << "{\"frame\": 1, \"points\": []}\n";
  EXPECT_EQ(code_of([&] { read_landmarks_jsonl(root / "bad.jsonl"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { read_landmarks_jsonl(root / "none.jsonl"); }), ErrorCode::MissingFile);
}

TEST(Clip, PpmRoundTrip) {
  const fs::path root = testing_support::scratch_dir("ppm");
  const Image img = render_face(FaceParams{}).image;
  write_ppm(root / "a.ppm", img);
  EXPECT_EQ(read_ppm(root / "a.ppm"), img);
  std::ofstream(root / "b.ppm") << "P3\n1 1\n255\n0 0 0\n";
  EXPECT_EQ(code_of([&] { read_ppm(root / "b.ppm"); }), ErrorCode::ParseError);
}
