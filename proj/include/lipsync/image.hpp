#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lipsync/error.hpp"

namespace lipsync {

using Rgb = std::array<double, 3>;

/// H x W x 3 image, row-major, interleaved channels, values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0.0, 0.0, 0.0}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::BadArgument, "image size must be positive");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = fill[0];
      data_[i + 1] = fill[1];
      data_[i + 2] = fill[2];
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c) { return data_[index(x, y) + c]; }
  double at(int x, int y, int c) const { return data_[index(x, y) + c]; }

  Rgb pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, const Rgb& v) {
    const std::size_t i = index(x, y);
    data_[i] = v[0];
    data_[i + 1] = v[1];
    data_[i + 2] = v[2];
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Quantizes to 8 bits exactly as write_ppm does.
inline Image quantize8(const Image& img) {
  Image out = img;
  for (auto& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

inline std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + img.data().size());
  for (double v : img.data()) bytes.push_back(to_byte(v));
  return bytes;
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Binary P6 with maxval 255; comments in the header are accepted.
inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());

  auto next_token = [&]() {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
      if (ch == '#') {
        while ((ch = in.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    return tok;
  };

  if (next_token() != "P6") throw Error(ErrorCode::ParseError, path.string() + ": not a P6 file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, path.string() + ": bad PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255)
    throw Error(ErrorCode::ParseError, path.string() + ": unsupported PPM geometry or maxval");

  Image img(w, h);
  std::vector<std::uint8_t> raw(img.data().size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw Error(ErrorCode::ParseError, path.string() + ": truncated pixel data");
  for (std::size_t i = 0; i < raw.size(); ++i) img.data()[i] = raw[i] / 255.0;
  return img;
}

}  // namespace lipsync
