#pragma once

// Text-to-speech boundary. Real synthesis is out of scope; the stub turns each
// character into a fixed-length tone so that audio carries the text content in
// a deterministic, learnable way.

#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>
#include <string_view>

#include "lipsync/audio.hpp"
#include "lipsync/error.hpp"

namespace lipsync {

class TtsAdapter {
 public:
  virtual ~TtsAdapter() = default;
  /// 16 kHz mono speech for `text`.
  virtual Waveform synthesize(std::string_view text) const = 0;
};

/// Character -> tone frequency:
///   letters (case-insensitive, index i = 0 for 'a') : 220 * 2^(i/6) Hz
///   whitespace                                      : silence
///   any other byte c                                : as letter index (c mod 26)
inline std::optional<int> stub_tone_index(char ch) {
  const auto u = static_cast<unsigned char>(ch);
  if (std::isspace(u)) return std::nullopt;
  if (std::isalpha(u)) return std::tolower(u) - 'a';
  return u % 26;
}

inline std::optional<double> stub_tone_frequency(char ch) {
  const auto index = stub_tone_index(ch);
  if (!index) return std::nullopt;
  return 220.0 * std::exp2(*index / 6.0);
}

struct StubTtsOptions {
  double seconds_per_char = 0.15;
  double amplitude = 0.5;
};

inline int stub_samples_per_char(const StubTtsOptions& opt = {}) {
  return static_cast<int>(std::lround(opt.seconds_per_char * kTargetSampleRate));
}

/// Each character becomes samples_per_char samples of amplitude * sin(2 pi f n / 16000),
/// phase restarting at every character.
inline Waveform stub_tts(std::string_view text, const StubTtsOptions& opt = {}) {
  if (text.empty()) throw Error(ErrorCode::EmptyText, "text is empty");
  const int per_char = stub_samples_per_char(opt);
  Waveform w;
  w.sample_rate = kTargetSampleRate;
  w.samples.reserve(text.size() * static_cast<std::size_t>(per_char));
  for (char ch : text) {
    const auto f = stub_tone_frequency(ch);
    for (int n = 0; n < per_char; ++n)
      w.samples.push_back(f ? opt.amplitude * std::sin(2.0 * std::numbers::pi * *f * n / kTargetSampleRate) : 0.0);
  }
  return w;
}

class StubTts final : public TtsAdapter {
 public:
  explicit StubTts(StubTtsOptions opt = {}) : opt_(opt) {}
  Waveform synthesize(std::string_view text) const override { return stub_tts(text, opt_); }

 private:
  StubTtsOptions opt_;
};

}  // namespace lipsync
