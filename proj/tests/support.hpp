#pragma once

// Test-side reference implementations. None of these call into the library
// routine they are used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lipsync.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lipsync_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline bool has_staging_leftovers(const fs::path& parent) {
  if (!fs::exists(parent)) return false;
  for (const auto& e : fs::directory_iterator(parent))
    if (e.path().filename().string().find(".staging") != std::string::npos) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Similarity transform p -> alpha R(phi) p + t, written out componentwise.

struct Similarity {
  double alpha = 1.0;
  double phi = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  lipsync::Vec2 apply(lipsync::Vec2 p) const {
    const double c = std::cos(phi), s = std::sin(phi);
    return {alpha * (c * p.x - s * p.y) + tx, alpha * (s * p.x + c * p.y) + ty};
  }
  lipsync::Landmarks68 apply(const lipsync::Landmarks68& lm) const {
    lipsync::Landmarks68 out;
    for (std::size_t i = 0; i < lipsync::kNumLandmarks; ++i) out[i] = apply(lm[i]);
    return out;
  }
};

inline double wrapped_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
  if (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
  return d;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for small symmetric matrices.

struct EigenPairs {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[i] pairs with values[i]
};

inline EigenPairs jacobi_eigen(std::vector<std::vector<double>> a, int sweeps = 100) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  EigenPairs out;
  for (std::size_t i : order) {
    out.values.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    out.vectors.push_back(col);
  }
  return out;
}

/// Sample covariance with divisor N-1, computed with plain loops.
inline std::vector<std::vector<double>> covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n - 1);
  return c;
}

// ---------------------------------------------------------------------------
// Spectrum

/// Frequency (Hz) of the largest-magnitude bin of a direct O(N^2) DFT.
inline double dft_peak_hz(std::span<const double> x, double sample_rate) {
  const std::size_t n = x.size();
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return static_cast<double>(best) * sample_rate / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Rasterization oracle

struct PixelLess {
  bool operator()(std::pair<int, int> a, std::pair<int, int> b) const { return a < b; }
};
using PixelSet = std::set<std::pair<int, int>, PixelLess>;

/// Pixels of the segment a -> b, searched exhaustively. Along the major axis
/// step i, the minor offset m is the one with -major <= 2 major m - 2 i minor < major.
inline PixelSet oracle_segment(int ax, int ay, int bx, int by) {
  PixelSet out;
  const int dx = std::abs(bx - ax), dy = std::abs(by - ay);
  const int sx = bx >= ax ? 1 : -1, sy = by >= ay ? 1 : -1;
  const bool x_major = dx >= dy;
  const int major = x_major ? dx : dy, minor = x_major ? dy : dx;
  for (int i = 0; i <= major; ++i) {
    int found = 0;
    for (int m = 0; m <= minor; ++m) {
      const long long v = 2LL * major * m - 2LL * i * minor;
      if (v >= -major && v < major) {
        ++found;
        if (x_major) out.insert({ax + sx * i, ay + sy * m});
        else out.insert({ax + sx * m, ay + sy * i});
      }
    }
    if (major > 0 && found != 1) std::abort();
  }
  if (major == 0) out.insert({ax, ay});
  return out;
}

/// Outline pixels of the outer and inner lip loops, endpoints clamped into the image.
inline PixelSet oracle_outline(const lipsync::MouthPoints& mouth, int width, int height) {
  PixelSet out;
  auto px = [&](lipsync::Vec2 p) {
    return std::pair<int, int>{std::clamp(static_cast<int>(std::floor(p.x)), 0, width - 1),
                               std::clamp(static_cast<int>(std::floor(p.y)), 0, height - 1)};
  };
  auto loop = [&](std::size_t begin, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto a = px(mouth[begin + i]);
      const auto b = px(mouth[begin + (i + 1) % count]);
      for (const auto& p : oracle_segment(a.first, a.second, b.first, b.second))
        if (p.first >= 0 && p.first < width && p.second >= 0 && p.second < height) out.insert(p);
    }
  };
  loop(0, 12);
  loop(12, 8);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true value is
/// at the level of finite-difference round-off from dominating the maximum.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central-difference check of every parameter entry. `objective(accumulate)`
/// returns the loss and, when asked, adds the analytic gradient to the grads.
template <typename Objective>
double max_gradient_error(lipsync::nn::ParameterSet& params, Objective&& objective, double h = 1e-5) {
  params.zero_grad();
  objective(true);
  std::vector<Eigen::MatrixXd> analytic;
  for (const auto& t : params.tensors()) analytic.push_back(t.grad);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < params.tensors().size(); ++ti) {
    auto& value = params.at(ti).value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double keep = value.data()[i];
      value.data()[i] = keep + h;
      const double up = objective(false);
      value.data()[i] = keep - h;
      const double down = objective(false);
      value.data()[i] = keep;
      worst = std::max(worst, relative_error(analytic[ti].data()[i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Misc

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd x = a.array() - a.mean();
  const Eigen::ArrayXd y = b.array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

/// Moving-average toy data: log-mel features of random stub speech, target =
/// centred 5-frame average of one mel band (edges use the frames available).
inline std::vector<lipsync::SequencePair> moving_average_sequences(std::uint64_t seed, int count, int chars,
                                                                   int band = 5) {
  std::mt19937_64 rng(seed);
  std::vector<lipsync::SequencePair> out;
  for (int s = 0; s < count; ++s) {
    std::string text = lipsync::random_text(rng, static_cast<std::size_t>(chars));
    text[0] = 'a';
    const auto feats = lipsync::extract_features(lipsync::stub_tts(text)).frames;
    const Eigen::Index t_len = feats.rows();
    Eigen::MatrixXd target(t_len, 1);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index k = t - 2; k <= t + 2; ++k)
        if (k >= 0 && k < t_len) {
          sum += feats(k, band);
          ++n;
        }
      target(t, 0) = sum / n;
    }
    out.push_back({feats, target});
  }
  return out;
}

}  // namespace testing_support
