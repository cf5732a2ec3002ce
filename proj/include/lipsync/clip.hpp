#pragma once

// On-disk clips and the synthetic talking-face corpus.
//
// A clip directory holds
//   clip.json         {"fps", "n_frames", "width", "height", "text"}
//   frames/frame_%06d.ppm
//   landmarks.jsonl   one {"frame": i, "points": [[x, y] x 68]} per line,
//                     points in 1-based annotation order 1..68
//   audio.wav         16-bit PCM mono
// A corpus directory holds clip directories plus manifest.json:
//   {"clips": [{"frames_dir", "landmarks_path", "wav_path", "fps"}], "notes": ...}
// with paths relative to the manifest.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/audio.hpp"
#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/image.hpp"
#include "lipsync/nn.hpp"
#include "lipsync/synth_faces.hpp"
#include "lipsync/tts.hpp"

namespace lipsync {

namespace fs = std::filesystem;

inline std::string numbered(const char* prefix, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu.%s", prefix, index, ext);
  return buf;
}

inline std::string frame_file_name(std::size_t index) { return numbered("frame", index, "ppm"); }

// ---------------------------------------------------------------------------
// Landmarks JSONL

inline nlohmann::json landmarks_to_json(std::size_t frame, const Landmarks68& lm) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : lm.points) pts.push_back({p.x, p.y});
  return {{"frame", frame}, {"points", pts}};
}

inline void write_landmarks_jsonl(const fs::path& path, const std::vector<Landmarks68>& frames) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < frames.size(); ++i) out << landmarks_to_json(i, frames[i]).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Records must be numbered 0, 1, 2, ... in order. An empty file is an error.
inline std::vector<Landmarks68> read_landmarks_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::vector<Landmarks68> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("frame").get<std::size_t>() != frames.size())
        throw Error(ErrorCode::ParseError, where + ": frames must be numbered consecutively from 0");
      const auto& pts = j.at("points");
      if (!pts.is_array() || pts.size() != kNumLandmarks)
        throw Error(ErrorCode::ParseError, where + ": expected 68 points");
      Landmarks68 lm;
      for (std::size_t i = 0; i < kNumLandmarks; ++i) {
        const auto xy = pts[i].get<std::vector<double>>();
        if (xy.size() != 2) throw Error(ErrorCode::ParseError, where + ": point is not [x, y]");
        lm[i] = {xy[0], xy[1]};
      }
      if (!lm.finite()) throw Error(ErrorCode::ParseError, where + ": non-finite landmark");
      frames.push_back(lm);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
  }
  if (frames.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no landmark records");
  return frames;
}

/// Where per-frame landmarks come from. Detection is out of scope; the file
/// source reads landmarks.jsonl written by any detector or by the generator.
class LandmarkSource {
 public:
  virtual ~LandmarkSource() = default;
  virtual std::vector<Landmarks68> load() const = 0;
};

class JsonlLandmarkSource final : public LandmarkSource {
 public:
  explicit JsonlLandmarkSource(fs::path path) : path_(std::move(path)) {}
  std::vector<Landmarks68> load() const override { return read_landmarks_jsonl(path_); }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// Clips

struct ClipInfo {
  fs::path frames_dir;
  fs::path landmarks_path;
  fs::path wav_path;
  double fps = 25.0;
};

/// Clip described by `dir/clip.json` with the standard layout.
inline ClipInfo open_clip_dir(const fs::path& dir) {
  const auto meta = nn::read_json_file(dir / "clip.json");
  ClipInfo c;
  c.frames_dir = dir / "frames";
  c.landmarks_path = dir / "landmarks.jsonl";
  c.wav_path = dir / "audio.wav";
  c.fps = meta.value("fps", 25.0);
  if (!(c.fps > 0)) throw Error(ErrorCode::ParseError, "clip fps must be positive");
  return c;
}

/// Number of consecutive frame_%06d.ppm files starting at 0.
inline std::size_t count_frames(const fs::path& frames_dir) {
  if (!fs::is_directory(frames_dir)) throw Error(ErrorCode::MissingFile, "no frames directory " + frames_dir.string());
  std::size_t n = 0;
  while (fs::exists(frames_dir / frame_file_name(n))) ++n;
  return n;
}

struct CorpusManifest {
  std::vector<ClipInfo> clips;
  std::string notes;
};

inline CorpusManifest read_corpus_manifest(const fs::path& path) {
  const auto j = nn::read_json_file(path);
  const fs::path base = path.parent_path();
  CorpusManifest m;
  try {
    for (const auto& c : j.at("clips")) {
      ClipInfo info;
      info.frames_dir = base / c.at("frames_dir").get<std::string>();
      info.landmarks_path = base / c.at("landmarks_path").get<std::string>();
      info.wav_path = base / c.at("wav_path").get<std::string>();
      info.fps = c.at("fps").get<double>();
      if (!(info.fps > 0)) throw Error(ErrorCode::ParseError, "clip fps must be positive");
      m.clips.push_back(info);
    }
    m.notes = j.value("notes", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (m.clips.empty()) throw Error(ErrorCode::EmptyDataset, "manifest lists no clips");
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic talking clips

/// Mouth latents a character drives in synthetic clips. Letters map through
/// golden-ratio style fractional sequences; silence gives a closed, neutral mouth.
inline FaceParams viseme(char ch, FaceParams base) {
  const auto index = stub_tone_index(ch);
  if (!index) {
    base.mouth_open = 0.05;
    base.mouth_wide = 0.5;
    base.smile = 0.0;
    base.jaw = 0.0;
    base.asymmetry = 0.0;
    return base;
  }
  const double i = *index;
  auto frac = [](double v) { return v - std::floor(v); };
  base.mouth_open = 0.1 + 0.9 * frac(0.10 + 0.61803 * i);
  base.mouth_wide = frac(0.30 + 0.41421 * i);
  base.smile = 2.0 * frac(0.70 + 0.73205 * i) - 1.0;
  base.jaw = frac(0.50 + 0.23607 * i);
  base.asymmetry = 2.0 * frac(0.20 + 0.31831 * i) - 1.0;
  return base;
}

struct SynthClipOptions {
  double seconds = 10.0;
  double fps = 25.0;
  int width = 64;
  int height = 64;
};

struct SynthClip {
  std::string text;
  Waveform audio;  // 16-bit quantized
  std::vector<SyntheticSample> frames;
};

inline std::string random_text(std::mt19937_64& rng, std::size_t length) {
  std::string s;
  for (std::size_t i = 0; i < length; ++i) {
    const auto r = rng() % 32;
    s.push_back(r < 26 ? static_cast<char>('a' + r) : ' ');
  }
  return s;
}

/// One talking clip: random text, stub speech trimmed to exactly `seconds`,
/// one frame per audio feature frame. The mouth of frame f follows the
/// character under the centre of its analysis window, averaged over frames
/// f-1..f+1; the head drifts slowly.
inline SynthClip synth_clip(std::uint64_t seed, const SynthClipOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  const FeatureConfig fcfg{.fps = opt.fps};
  const int per_char = stub_samples_per_char();
  const auto n_samples = static_cast<std::size_t>(std::llround(opt.seconds * kTargetSampleRate));
  const std::size_t n_chars = (n_samples + static_cast<std::size_t>(per_char) - 1) / static_cast<std::size_t>(per_char);

  SynthClip clip;
  clip.text = random_text(rng, n_chars);
  clip.audio = quantized(stub_tts(clip.text));
  clip.audio.samples.resize(n_samples);

  const int n_frames = feature_frame_count(n_samples, fcfg);
  if (n_frames < 1) throw Error(ErrorCode::TooShort, "clip shorter than one analysis window");

  CorpusOptions pose;
  pose.width = opt.width;
  pose.height = opt.height;
  pose.center_jitter = 2.0;
  pose.max_rotation = 0.15;
  pose.scale_min = 0.36 * opt.height;
  pose.scale_max = 0.40 * opt.height;
  FaceParams base = sample_face_params(rng, 0, pose);
  const double phase[3] = {uniform(rng, 0, 6.28), uniform(rng, 0, 6.28), uniform(rng, 0, 6.28)};

  std::vector<FaceParams> raw(static_cast<std::size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    const std::size_t centre =
        static_cast<std::size_t>(f) * static_cast<std::size_t>(fcfg.hop_samples()) + static_cast<std::size_t>(fcfg.window_samples()) / 2;
    raw[static_cast<std::size_t>(f)] = viseme(clip.text[std::min(n_chars - 1, centre / static_cast<std::size_t>(per_char))], base);
  }
  for (int f = 0; f < n_frames; ++f) {
    FaceParams fp = base;
    double open = 0, wide = 0, smile = 0, jaw = 0, asym = 0;
    for (int k = -1; k <= 1; ++k) {
      const auto& r = raw[static_cast<std::size_t>(std::clamp(f + k, 0, n_frames - 1))];
      open += r.mouth_open / 3;
      wide += r.mouth_wide / 3;
      smile += r.smile / 3;
      jaw += r.jaw / 3;
      asym += r.asymmetry / 3;
    }
    fp.mouth_open = open;
    fp.mouth_wide = wide;
    fp.smile = smile;
    fp.jaw = jaw;
    fp.asymmetry = asym;
    const double t = f / opt.fps;
    fp.center = base.center + Vec2{1.5 * std::sin(0.7 * t + phase[0]), 1.0 * std::sin(0.5 * t + phase[1])};
    fp.rotation = base.rotation + 0.05 * std::sin(0.4 * t + phase[2]);
    clip.frames.push_back(render_face(fp));
  }
  return clip;
}

inline void write_clip_dir(const fs::path& dir, const SynthClip& clip, double fps) {
  fs::create_directories(dir / "frames");
  std::vector<Landmarks68> lms;
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    write_ppm(dir / "frames" / frame_file_name(i), clip.frames[i].image);
    lms.push_back(clip.frames[i].landmarks);
  }
  write_landmarks_jsonl(dir / "landmarks.jsonl", lms);
  write_wav(dir / "audio.wav", clip.audio);
  const auto& first = clip.frames.front().image;
  nn::write_json_file(dir / "clip.json", {{"fps", fps},
                                          {"n_frames", clip.frames.size()},
                                          {"width", first.width()},
                                          {"height", first.height()},
                                          {"text", clip.text}});
}

}  // namespace lipsync
