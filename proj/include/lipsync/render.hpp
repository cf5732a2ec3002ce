#pragma once

// Text -> speech -> mouth coefficients -> denormalized outlines -> in-painted
// frames, plus the consistency checker for rendered outputs.
//
// Output directory:
//   frame_%06d.ppm  audio.wav  pca_basis.json  render_manifest.json

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/audio.hpp"
#include "lipsync/clip.hpp"
#include "lipsync/conditioner.hpp"
#include "lipsync/dataset.hpp"
#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/inpainter.hpp"
#include "lipsync/pca.hpp"
#include "lipsync/predictor.hpp"
#include "lipsync/tts.hpp"

namespace lipsync {

struct RenderFrame {
  std::size_t frame_index = 0;
  std::size_t source_target_frame = 0;
  NormalizationParams params;
  MouthPoints mouth_points_px{};
  Eigen::VectorXd coeffs;
};

struct RenderManifest {
  double fps = 25.0;
  std::string audio_path = "audio.wav";
  std::string pca_path = "pca_basis.json";
  std::vector<RenderFrame> frames;
};

inline nlohmann::json to_json(const RenderManifest& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : m.frames) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : f.mouth_points_px) pts.push_back({p.x, p.y});
    frames.push_back({{"frame_index", f.frame_index},
                      {"source_target_frame", f.source_target_frame},
                      {"params",
                       {{"center", {f.params.center.x, f.params.center.y}},
                        {"theta", f.params.theta},
                        {"scale", f.params.scale}}},
                      {"mouth_points_px", pts},
                      {"coeffs", nn::to_vector(f.coeffs)}});
  }
  return {{"fps", m.fps},
          {"audio_path", m.audio_path},
          {"pca_path", m.pca_path},
          {"frame_count", m.frames.size()},
          {"frames", frames}};
}

inline RenderManifest render_manifest_from_json(const nlohmann::json& j) {
  try {
    RenderManifest m;
    m.fps = j.at("fps").get<double>();
    m.audio_path = j.at("audio_path").get<std::string>();
    m.pca_path = j.value("pca_path", "pca_basis.json");
    for (const auto& f : j.at("frames")) {
      RenderFrame r;
      r.frame_index = f.at("frame_index").get<std::size_t>();
      r.source_target_frame = f.at("source_target_frame").get<std::size_t>();
      const auto c = f.at("params").at("center").get<std::vector<double>>();
      if (c.size() != 2) throw Error(ErrorCode::ParseError, "center must be [x, y]");
      r.params = {{c[0], c[1]}, f.at("params").at("theta").get<double>(), f.at("params").at("scale").get<double>()};
      const auto& pts = f.at("mouth_points_px");
      if (pts.size() != kNumMouth) throw Error(ErrorCode::ParseError, "expected 20 mouth points");
      for (std::size_t i = 0; i < kNumMouth; ++i) {
        const auto xy = pts[i].get<std::vector<double>>();
        if (xy.size() != 2) throw Error(ErrorCode::ParseError, "mouth point must be [x, y]");
        r.mouth_points_px[i] = {xy[0], xy[1]};
      }
      r.coeffs = nn::vector_from_json(f.at("coeffs"));
      m.frames.push_back(std::move(r));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("render manifest: ") + e.what());
  }
}

/// Mouth pixels for one frame: denormalize(reconstruct(coeffs), params).
inline MouthPoints mouth_from_coeffs(const PcaBasis& basis, const Eigen::VectorXd& coeffs,
                                     const NormalizationParams& params) {
  const Eigen::VectorXd shape = reconstruct(basis, coeffs);
  if (shape.size() != static_cast<Eigen::Index>(kMouthShapeDim))
    throw Error(ErrorCode::ShapeMismatch, "PCA basis is not over 40-D mouth shapes");
  return denormalize(std::span<const double, kMouthShapeDim>(shape.data(), kMouthShapeDim), params);
}

struct RenderInputs {
  std::optional<std::string> text;  // synthesized with `tts` when set
  std::optional<fs::path> audio;    // otherwise read from this WAV
  fs::path target_clip;
  PcaBasis pca;
  PredictorModel predictor;
  InpainterModel inpainter;
  const TtsAdapter* tts = nullptr;  // defaults to the stub
  int workers = 1;
  double bbox_expand = kDefaultBoxExpand;
};

/// Runs `fn(i)` for i in [0, n) on `workers` threads. The first failure (by
/// index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::optional<std::size_t> failed_at;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failed_at || i < *failed_at) {
            failed_at = i;
            failure = std::current_exception();
          }
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline RenderManifest render_video(const RenderInputs& in, const fs::path& out_dir) {
  Waveform audio;
  if (in.text) {
    const StubTts stub;
    const TtsAdapter& tts = in.tts ? *in.tts : static_cast<const TtsAdapter&>(stub);
    audio = quantized(resample_to_16k(tts.synthesize(*in.text)));
  } else if (in.audio) {
    audio = resample_to_16k(read_wav(*in.audio));
  } else {
    throw Error(ErrorCode::BadArgument, "render needs text or an audio file");
  }

  const ClipInfo clip = open_clip_dir(in.target_clip);
  const auto target_landmarks = JsonlLandmarkSource(clip.landmarks_path).load();
  const std::size_t target_frames = std::min(count_frames(clip.frames_dir), target_landmarks.size());

  FeatureConfig fcfg;
  fcfg.fps = clip.fps;
  const AudioFeatureSequence features = extract_features(audio, fcfg);
  const auto n = static_cast<std::size_t>(features.length());
  if (n > target_frames)
    throw Error(ErrorCode::InsufficientTargetFrames, "audio needs " + std::to_string(n) + " frames, target has " +
                                                         std::to_string(target_frames));
  if (in.pca.k() != in.predictor.config.output_dim)
    throw Error(ErrorCode::ShapeMismatch, "predictor output does not match PCA k");
  const Eigen::MatrixXd coeffs = predict_coeffs(in.predictor, features.frames);

  RenderManifest manifest;
  manifest.fps = clip.fps;
  manifest.frames.resize(n);

  StagedDir stage(out_dir);
  parallel_for(n, in.workers, [&](std::size_t t) {
    RenderFrame& rf = manifest.frames[t];
    rf.frame_index = t;
    rf.source_target_frame = t;
    rf.params = estimate_frame(target_landmarks[t]);
    rf.coeffs = coeffs.row(static_cast<Eigen::Index>(t)).transpose();
    rf.mouth_points_px = mouth_from_coeffs(in.pca, rf.coeffs, rf.params);
    const Image target = read_ppm(clip.frames_dir / frame_file_name(t));
    const ConditionedPair pair = make_conditioned_pair(target, rf.mouth_points_px, in.bbox_expand);
    write_ppm(stage.path() / frame_file_name(t), infer_frame(in.inpainter, pair.input));
  });

  write_wav(stage.path() / manifest.audio_path, audio);
  save_pca(stage.path() / manifest.pca_path, in.pca);
  nn::write_json_file(stage.path() / "render_manifest.json", to_json(manifest));
  stage.commit();
  return manifest;
}

struct VerifyReport {
  std::vector<std::string> violations;
  std::size_t frames_checked = 0;
  bool compared = false;

  bool ok() const { return violations.empty(); }
};

inline bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  return std::equal(std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>(),
                    std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>());
}

/// Re-checks a render directory: manifest invariants (mouth points equal
/// denormalize(reconstruct(coeffs), params) within 1e-6), frame numbering and
/// count, frame files, audio length, and, when `compare_dir` is given,
/// byte equality of every frame and the manifest against that render.
inline VerifyReport verify_outputs(const fs::path& out_dir, const std::optional<fs::path>& compare_dir = {}) {
  VerifyReport rep;
  auto fail = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };

  RenderManifest manifest;
  PcaBasis basis;
  try {
    manifest = render_manifest_from_json(nn::read_json_file(out_dir / "render_manifest.json"));
    basis = load_pca(out_dir / manifest.pca_path);
  } catch (const Error& e) {
    fail(std::string("cannot load render outputs: ") + e.what());
    return rep;
  }

  int width = -1, height = -1;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    const auto& f = manifest.frames[i];
    if (f.frame_index != i) fail("manifest entry " + std::to_string(i) + " has frame_index " + std::to_string(f.frame_index));
    try {
      const MouthPoints expect = mouth_from_coeffs(basis, f.coeffs, f.params);
      double worst = 0.0;
      for (std::size_t p = 0; p < kNumMouth; ++p)
        worst = std::max({worst, std::abs(expect[p].x - f.mouth_points_px[p].x),
                          std::abs(expect[p].y - f.mouth_points_px[p].y)});
      if (!(worst <= 1e-6))
        fail(frame_file_name(i) + ": mouth points deviate from denormalize(reconstruct(coeffs)) by " + std::to_string(worst));
    } catch (const Error& e) {
      fail(frame_file_name(i) + ": " + e.what());
    }
    const auto path = out_dir / frame_file_name(i);
    if (!fs::exists(path)) {
      fail(frame_file_name(i) + ": missing frame file");
      continue;
    }
    try {
      const Image img = read_ppm(path);
      if (width < 0) {
        width = img.width();
        height = img.height();
      } else if (img.width() != width || img.height() != height) {
        fail(frame_file_name(i) + ": frame size differs from frame 0");
      }
      for (double v : img.data())
        if (!(v >= 0.0 && v <= 1.0)) {
          fail(frame_file_name(i) + ": pixel out of range");
          break;
        }
    } catch (const Error& e) {
      fail(frame_file_name(i) + ": " + e.what());
    }
    ++rep.frames_checked;
  }
  if (fs::exists(out_dir / frame_file_name(manifest.frames.size())))
    fail("frame files beyond the manifest's frame count");

  try {
    FeatureConfig cfg;
    cfg.fps = manifest.fps;
    const Waveform audio = resample_to_16k(read_wav(out_dir / manifest.audio_path));
    const auto expected = static_cast<std::size_t>(feature_frame_count(audio.samples.size(), cfg));
    if (expected != manifest.frames.size())
      fail("audio covers " + std::to_string(expected) + " frames but " + std::to_string(manifest.frames.size()) +
           " were rendered");
  } catch (const Error& e) {
    fail(std::string("audio: ") + e.what());
  }

  if (compare_dir) {
    rep.compared = true;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i)
      if (!same_bytes(out_dir / frame_file_name(i), *compare_dir / frame_file_name(i)))
        fail(frame_file_name(i) + ": differs from " + compare_dir->string());
    if (fs::exists(*compare_dir / frame_file_name(manifest.frames.size())))
      fail(compare_dir->string() + ": has more frames");
    if (!same_bytes(out_dir / "render_manifest.json", *compare_dir / "render_manifest.json"))
      fail("render_manifest.json differs from " + compare_dir->string());
  }
  return rep;
}

}  // namespace lipsync
