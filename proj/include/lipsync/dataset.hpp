#pragma once

// Dataset building: PCA over every normalized mouth, aligned (features,
// coefficients) sequences per clip, and in-painting pairs sampled at a fixed
// rate per second of video.
//
// Output layout:
//   pca_basis.json
//   sequences/clip_%06d.json   {"fps", "features": [[F] x T], "coeffs": [[k] x T]}
//   pairs/input_%06d.ppm, pairs/target_%06d.ppm
//   pairs.jsonl                {"pair", "clip", "frame", "bbox": [x0, y0, x1, y1]}
//   summary.json

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/audio.hpp"
#include "lipsync/clip.hpp"
#include "lipsync/conditioner.hpp"
#include "lipsync/error.hpp"
#include "lipsync/geometry.hpp"
#include "lipsync/nn.hpp"
#include "lipsync/pca.hpp"
#include "lipsync/predictor.hpp"

namespace lipsync {

/// Writes go to a sibling staging directory that replaces the destination
/// only on commit(); otherwise the staging directory is removed.
class StagedDir {
 public:
  explicit StagedDir(fs::path dest) : dest_(std::move(dest)) {
    if (dest_.filename().empty()) dest_ = dest_.parent_path();
    staging_ = dest_;
    staging_ += ".staging";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& path() const { return staging_; }

  void commit() {
    fs::remove_all(dest_);
    fs::rename(staging_, dest_);
    committed_ = true;
  }

 private:
  fs::path dest_;
  fs::path staging_;
  bool committed_ = false;
};

struct DatasetOptions {
  double pairs_per_sec = 1.0;
  int pca_k = 5;
  double bbox_expand = kDefaultBoxExpand;
  FeatureConfig features;  // fps is taken from each clip
};

struct DatasetSummary {
  std::size_t clips = 0;
  std::size_t frames = 0;
  std::size_t sequence_frames = 0;
  std::size_t pairs = 0;
  std::size_t degenerate_frames = 0;
  std::size_t skipped_pairs = 0;
  double pca_cumulative_ratio = 0.0;
};

inline nlohmann::json to_json(const DatasetSummary& s) {
  return {{"clips", s.clips},
          {"frames", s.frames},
          {"sequence_frames", s.sequence_frames},
          {"pairs", s.pairs},
          {"degenerate_frames", s.degenerate_frames},
          {"skipped_pairs", s.skipped_pairs},
          {"pca_cumulative_ratio", s.pca_cumulative_ratio}};
}

/// Frame indices sampled at `per_second` frames per second of video:
/// round(m * fps / per_second) for m = 0, 1, ... while below n_frames.
inline std::vector<std::size_t> pair_frame_indices(std::size_t n_frames, double fps, double per_second) {
  if (!(per_second > 0) || !(fps > 0)) throw Error(ErrorCode::BadArgument, "sampling rates must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t m = 0;; ++m) {
    const auto f = static_cast<std::size_t>(std::llround(static_cast<double>(m) * fps / per_second));
    if (f >= n_frames) break;
    if (idx.empty() || idx.back() != f) idx.push_back(f);
  }
  return idx;
}

/// Audio features for a clip at its own frame rate (resampled to 16 kHz if needed).
inline AudioFeatureSequence clip_features(const fs::path& wav, double fps, FeatureConfig cfg = {}) {
  cfg.fps = fps;
  return extract_features(resample_to_16k(read_wav(wav)), cfg);
}

inline nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows) {
  const auto v = rows.get<std::vector<std::vector<double>>>();
  if (v.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.front().size()));
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (v[r].size() != v.front().size()) throw Error(ErrorCode::ParseError, "ragged matrix rows");
    for (std::size_t c = 0; c < v[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c];
  }
  return m;
}

inline DatasetSummary build_dataset(const CorpusManifest& manifest, const fs::path& out_dir,
                                    const DatasetOptions& opt = {}) {
  struct ClipData {
    std::vector<Landmarks68> landmarks;
    AudioFeatureSequence features;
    std::size_t length = 0;          // aligned frame count
    std::vector<int> shape_row;      // row in `shapes`, -1 for a degenerate frame
  };

  DatasetSummary summary;
  std::vector<ClipData> clips;
  std::vector<MouthShape40> shapes;

  for (const auto& info : manifest.clips) {
    ClipData cd;
    cd.landmarks = JsonlLandmarkSource(info.landmarks_path).load();
    const std::size_t n_video = count_frames(info.frames_dir);
    if (n_video != cd.landmarks.size())
      throw Error(ErrorCode::AlignmentError, info.frames_dir.string() + ": " + std::to_string(n_video) +
                                                 " frames but " + std::to_string(cd.landmarks.size()) + " landmark records");
    if (!fs::exists(info.wav_path)) throw Error(ErrorCode::MissingFile, "missing audio " + info.wav_path.string());
    cd.features = clip_features(info.wav_path, info.fps, opt.features);
    const auto n_audio = static_cast<std::size_t>(cd.features.length());
    const auto gap = n_audio > n_video ? n_audio - n_video : n_video - n_audio;
    if (gap > 1)
      throw Error(ErrorCode::AlignmentError, info.wav_path.string() + ": " + std::to_string(n_audio) +
                                                 " audio frames vs " + std::to_string(n_video) + " video frames");
    cd.length = std::min(n_audio, n_video);
    summary.frames += n_video;

    for (std::size_t f = 0; f < cd.length; ++f) {
      try {
        shapes.push_back(mouth_shape(cd.landmarks[f]));
        cd.shape_row.push_back(static_cast<int>(shapes.size()) - 1);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateFace) throw;
        cd.shape_row.push_back(-1);
        ++summary.degenerate_frames;
      }
    }
    clips.push_back(std::move(cd));
  }

  Eigen::MatrixXd samples(static_cast<Eigen::Index>(shapes.size()), static_cast<Eigen::Index>(kMouthShapeDim));
  for (std::size_t r = 0; r < shapes.size(); ++r)
    for (std::size_t c = 0; c < kMouthShapeDim; ++c) samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = shapes[r][c];
  const PcaBasis basis = fit_pca(samples, opt.pca_k);
  summary.pca_cumulative_ratio = basis.cumulative_ratio(basis.k());

  StagedDir stage(out_dir);
  save_pca(stage.path() / "pca_basis.json", basis);
  fs::create_directories(stage.path() / "sequences");
  fs::create_directories(stage.path() / "pairs");
  std::ofstream pairs_manifest(stage.path() / "pairs.jsonl");

  for (std::size_t ci = 0; ci < clips.size(); ++ci) {
    const auto& cd = clips[ci];
    const auto& info = manifest.clips[ci];

    // degenerate frames take the nearest earlier valid shape (or the first valid one)
    Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(cd.length), basis.k());
    int last = -1;
    for (std::size_t f = 0; f < cd.length; ++f)
      if (cd.shape_row[f] >= 0) {
        last = cd.shape_row[f];
        break;
      }
    if (last < 0) throw Error(ErrorCode::DegenerateFace, "every frame of " + info.landmarks_path.string() + " is degenerate");
    for (std::size_t f = 0; f < cd.length; ++f) {
      if (cd.shape_row[f] >= 0) last = cd.shape_row[f];
      coeffs.row(static_cast<Eigen::Index>(f)) = project(basis, samples.row(last).transpose()).transpose();
    }
    const nlohmann::json seq{{"fps", info.fps},
                             {"features", matrix_rows(cd.features.frames.topRows(static_cast<Eigen::Index>(cd.length)))},
                             {"coeffs", matrix_rows(coeffs)}};
    nn::write_json_file(stage.path() / "sequences" / numbered("clip", ci, "json"), seq);
    summary.sequence_frames += cd.length;

    for (std::size_t f : pair_frame_indices(cd.landmarks.size(), info.fps, opt.pairs_per_sec)) {
      const Image img = read_ppm(info.frames_dir / frame_file_name(f));
      ConditionedPair pair;
      try {
        pair = make_conditioned_pair(img, cd.landmarks[f], opt.bbox_expand);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyBox && e.code() != ErrorCode::OutOfFrame) throw;
        ++summary.skipped_pairs;
        continue;
      }
      const std::size_t id = summary.pairs++;
      write_ppm(stage.path() / "pairs" / numbered("input", id, "ppm"), pair.input);
      write_ppm(stage.path() / "pairs" / numbered("target", id, "ppm"), pair.target);
      const nlohmann::json rec{{"pair", id},
                               {"clip", ci},
                               {"frame", f},
                               {"bbox", {pair.bbox.x0, pair.bbox.y0, pair.bbox.x1, pair.bbox.y1}}};
      pairs_manifest << rec.dump() << '\n';
    }
  }
  pairs_manifest.close();
  if (!pairs_manifest) throw Error(ErrorCode::IoError, "failed writing pairs.jsonl");
  summary.clips = clips.size();
  nn::write_json_file(stage.path() / "summary.json", to_json(summary));
  stage.commit();
  return summary;
}

/// Sequences written by build_dataset, in clip order.
inline std::vector<SequencePair> load_sequences(const fs::path& data_dir) {
  std::vector<SequencePair> out;
  for (std::size_t i = 0;; ++i) {
    const auto path = data_dir / "sequences" / numbered("clip", i, "json");
    if (!fs::exists(path)) break;
    const auto j = nn::read_json_file(path);
    try {
      out.push_back({matrix_from_rows(j.at("features")), matrix_from_rows(j.at("coeffs"))});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "no sequences under " + data_dir.string());
  return out;
}

/// Pairs written by build_dataset, in pair order.
inline std::vector<ConditionedPair> load_pairs(const fs::path& data_dir) {
  std::ifstream in(data_dir / "pairs.jsonl");
  if (!in) throw Error(ErrorCode::MissingFile, "no pairs.jsonl under " + data_dir.string());
  std::vector<ConditionedPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("pair").get<std::size_t>();
      const auto b = j.at("bbox").get<std::vector<int>>();
      if (b.size() != 4) throw Error(ErrorCode::ParseError, "bbox must have 4 entries");
      ConditionedPair p;
      p.input = read_ppm(data_dir / "pairs" / numbered("input", id, "ppm"));
      p.target = read_ppm(data_dir / "pairs" / numbered("target", id, "ppm"));
      p.bbox = {b[0], b[1], b[2], b[3]};
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "pairs.jsonl: " + std::string(e.what()));
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "no pairs under " + data_dir.string());
  return out;
}

}  // namespace lipsync
