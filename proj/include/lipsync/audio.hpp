#pragma once

// 16 kHz resampling, log-mel features at the video frame rate, and 16-bit PCM
// WAV I/O.

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/error.hpp"

namespace lipsync {

inline constexpr int kTargetSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kTargetSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double blackman(double u) {  // u in [-1, 1]
  return 0.42 + 0.5 * std::cos(std::numbers::pi * u) + 0.08 * std::cos(2.0 * std::numbers::pi * u);
}

}  // namespace detail

/// Windowed-sinc resampler (Blackman window, 16 zero crossings each side of
/// the kernel, cutoff at the lower of the two Nyquist frequencies). The kernel
/// is symmetric, so the filter is linear phase. Output length is
/// round(N * 16000 / rate).
inline Waveform resample_to_16k(const Waveform& in) {
  if (in.sample_rate < 8000 || in.sample_rate > 192000)
    throw Error(ErrorCode::UnsupportedRate, "sample rate " + std::to_string(in.sample_rate) +
                                                " outside [8000, 192000]");
  if (in.sample_rate == kTargetSampleRate) return in;

  const double ratio = static_cast<double>(in.sample_rate) / kTargetSampleRate;  // input samples per output
  const double cutoff = std::min(1.0, 1.0 / ratio);
  constexpr double zero_crossings = 16.0;
  const double half_width = zero_crossings / cutoff;

  const auto n_in = static_cast<std::int64_t>(in.samples.size());
  const auto n_out = static_cast<std::int64_t>(std::llround(static_cast<double>(n_in) / ratio));
  Waveform out;
  out.sample_rate = kTargetSampleRate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * ratio;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::int64_t>(n_in - 1, static_cast<std::int64_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double x = static_cast<double>(k) - t;
      acc += in.samples[static_cast<std::size_t>(k)] * cutoff * detail::sinc(cutoff * x) *
             detail::blackman(x / half_width);
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

struct FeatureConfig {
  double window_ms = 25.0;
  double fps = 25.0;
  int mel_bands = 26;
  double floor_eps = 1e-10;
  double max_freq = 8000.0;

  int window_samples() const { return static_cast<int>(std::lround(window_ms * 1e-3 * kTargetSampleRate)); }
  /// 1/fps seconds, rounded to whole samples.
  int hop_samples() const { return static_cast<int>(std::lround(kTargetSampleRate / fps)); }
  int fft_size() const {
    int n = 1;
    while (n < window_samples()) n <<= 1;
    return n;
  }

  void validate() const {
    if (!(fps > 0)) throw Error(ErrorCode::BadArgument, "fps must be positive");
    if (mel_bands < 1) throw Error(ErrorCode::BadArgument, "mel_bands must be >= 1");
    if (window_samples() < 2) throw Error(ErrorCode::BadArgument, "window too short");
    if (window_samples() > 4 * hop_samples()) throw Error(ErrorCode::BadArgument, "window must be <= 4 hops");
  }
};

struct AudioFeatureSequence {
  Eigen::MatrixXd frames;  // T x F
  double fps = 25.0;
  FeatureConfig config;

  int length() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// F triangular filters with edges equally spaced on the mel scale from 0 Hz to
/// max_freq; rows are filters, columns FFT bins 0..fft/2.
inline Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const int n_bins = n_fft / 2 + 1;
  const int f = cfg.mel_bands;
  const double mel_max = hz_to_mel(cfg.max_freq);
  std::vector<double> edges(static_cast<std::size_t>(f + 2));
  for (int i = 0; i < f + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_max * i / (f + 1));

  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(f, n_bins);
  for (int m = 0; m < f; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m + 1)];
    const double right = edges[static_cast<std::size_t>(m + 2)];
    for (int b = 0; b < n_bins; ++b) {
      const double hz = static_cast<double>(b) * kTargetSampleRate / n_fft;
      double w = 0.0;
      if (hz > left && hz <= center) w = (hz - left) / (center - left);
      else if (hz > center && hz < right) w = (right - hz) / (right - center);
      bank(m, b) = w;
    }
  }
  return bank;
}

/// Centre frequency of each mel band in Hz.
inline std::vector<double> mel_band_centers(const FeatureConfig& cfg) {
  const double mel_max = hz_to_mel(cfg.max_freq);
  std::vector<double> c(static_cast<std::size_t>(cfg.mel_bands));
  for (int m = 0; m < cfg.mel_bands; ++m) c[static_cast<std::size_t>(m)] = mel_to_hz(mel_max * (m + 1) / (cfg.mel_bands + 1));
  return c;
}

namespace detail {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

/// Real-to-complex transform of a fixed size. Plans are created once per size
/// under a lock; execution on fresh aligned buffers is thread-safe.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n))));
    out_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1))));
    plan_ = plan_for(n, in_.get(), out_.get());
  }

  /// Magnitudes |X_k| for k = 0..n/2 of the zero-padded input.
  void magnitudes(const double* x, int count, std::vector<double>& mag) {
    std::fill(in_.get(), in_.get() + n_, 0.0);
    std::copy(x, x + count, in_.get());
    fftw_execute_dft_r2c(plan_, in_.get(), out_.get());
    mag.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (int k = 0; k <= n_ / 2; ++k) mag[static_cast<std::size_t>(k)] = std::hypot(out_.get()[k][0], out_.get()[k][1]);
  }

 private:
  static fftw_plan plan_for(int n, double* in, fftw_complex* out) {
    static std::mutex mu;
    static std::map<int, fftw_plan> plans;
    std::lock_guard lock(mu);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    plans.emplace(n, p);
    return p;
  }

  int n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_;
};

}  // namespace detail

/// Number of feature frames: floor((N - win) / hop) + 1.
inline int feature_frame_count(std::size_t n_samples, const FeatureConfig& cfg) {
  const auto win = static_cast<std::size_t>(cfg.window_samples());
  if (n_samples < win) return 0;
  return static_cast<int>((n_samples - win) / static_cast<std::size_t>(cfg.hop_samples())) + 1;
}

/// Frame t covers samples [t*hop, t*hop + win): periodic Hann window, FFT
/// magnitude, mel filterbank, log(x + floor_eps).
inline AudioFeatureSequence extract_features(const Waveform& wave, const FeatureConfig& cfg = {}) {
  cfg.validate();
  if (wave.sample_rate != kTargetSampleRate)
    throw Error(ErrorCode::UnsupportedRate, "extract_features expects 16 kHz audio");
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  const int t_count = feature_frame_count(wave.samples.size(), cfg);
  if (t_count < 1) throw Error(ErrorCode::TooShort, "audio shorter than one analysis window");

  std::vector<double> window(static_cast<std::size_t>(win));
  for (int n = 0; n < win; ++n)
    window[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);

  const Eigen::MatrixXd bank = mel_filterbank(cfg);
  detail::RealFft fft(cfg.fft_size());

  AudioFeatureSequence seq;
  seq.fps = cfg.fps;
  seq.config = cfg;
  seq.frames.resize(t_count, cfg.mel_bands);
  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<double> mag;
  for (int t = 0; t < t_count; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    for (int n = 0; n < win; ++n)
      frame[static_cast<std::size_t>(n)] = wave.samples[start + static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(n)];
    fft.magnitudes(frame.data(), win, mag);
    const Eigen::Map<const Eigen::VectorXd> m(mag.data(), static_cast<Eigen::Index>(mag.size()));
    const Eigen::VectorXd energies = bank * m;
    for (int b = 0; b < cfg.mel_bands; ++b) seq.frames(t, b) = std::log(energies[b] + cfg.floor_eps);
  }
  return seq;
}

inline nlohmann::json features_to_json(const AudioFeatureSequence& seq) {
  nlohmann::json frames = nlohmann::json::array();
  for (int t = 0; t < seq.length(); ++t) {
    std::vector<double> row(static_cast<std::size_t>(seq.dim()));
    for (int b = 0; b < seq.dim(); ++b) row[static_cast<std::size_t>(b)] = seq.frames(t, b);
    frames.push_back(row);
  }
  return {{"fps", seq.fps}, {"F", seq.dim()}, {"frames", frames}};
}

// ---------------------------------------------------------------------------
// WAV (RIFF PCM 16-bit)

inline double quantize_pcm16(double x) {
  return static_cast<double>(std::lround(std::clamp(x, -1.0, 1.0) * 32767.0)) / 32767.0;
}

inline Waveform quantized(const Waveform& w) {
  Waveform out = w;
  for (auto& s : out.samples) s = quantize_pcm16(s);
  return out;
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  auto put32 = [&](std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  auto put16 = [&](std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
  };
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(16);
  put16(1);  // PCM
  put16(1);  // mono
  put32(static_cast<std::uint32_t>(w.sample_rate));
  put32(static_cast<std::uint32_t>(w.sample_rate * 2));
  put16(2);
  put16(16);
  out.write("data", 4);
  put32(data_bytes);
  for (double s : w.samples) {
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    put16(static_cast<std::uint16_t>(v));
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Reads 16-bit PCM mono or stereo; stereo channels are averaged.
inline Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto u32 = [&](std::size_t o) {
    return static_cast<std::uint32_t>(bytes[o]) | (static_cast<std::uint32_t>(bytes[o + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[o + 2]) << 16) | (static_cast<std::uint32_t>(bytes[o + 3]) << 24);
  };
  auto u16 = [&](std::size_t o) {
    return static_cast<std::uint16_t>(bytes[o] | (bytes[o + 1] << 8));
  };
  const auto bad = [&](const std::string& why) { return Error(ErrorCode::ParseError, path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw bad("not a RIFF/WAVE file");

  int channels = 0, rate = 0, bits = 0, format = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = u32(pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw bad("truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      format = u16(body);
      channels = u16(body + 2);
      rate = static_cast<int>(u32(body + 4));
      bits = u16(body + 14);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (format != 1 || bits != 16 || (channels != 1 && channels != 2))
        throw bad("only 16-bit PCM mono/stereo is supported");
      Waveform w;
      w.sample_rate = rate;
      const std::size_t frames = size / (2u * static_cast<std::size_t>(channels));
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c)
          acc += static_cast<std::int16_t>(u16(body + (i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * 2)) / 32767.0;
        w.samples[i] = acc / channels;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw bad("missing data chunk");
}

}  // namespace lipsync
