#pragma once

// Encoder-decoder with skip connections (U-Net) mapping a conditioned face
// image to the full face, trained with mean absolute pixel error only.
//
//   encoder l = 1..depth : 4x4 stride-2 conv, C(l) = base * 2^(l-1), LeakyReLU(0.2)
//   decoder l = depth..1 : 4x4 stride-2 transposed conv; ReLU, then
//                          concatenated with encoder level l-1 (l > 1);
//                          level 1 emits 3 channels through a sigmoid.
//
// Activations are (channels x pixels) column-major matrices, with the pixels
// of a batch laid side by side, so one image maps onto the interleaved RGB
// buffer of lipsync::Image without copying. Parameters live in double
// precision; the arithmetic runs in float or double per configuration.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/conditioner.hpp"
#include "lipsync/error.hpp"
#include "lipsync/image.hpp"
#include "lipsync/nn.hpp"

namespace lipsync {

struct InpainterConfig {
  int image_size = 64;
  int depth = 4;
  int base_channels = 32;
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 8;
  bool single_precision = true;
  std::uint64_t seed = 0;

  int channels(int level) const { return level == 0 ? 3 : base_channels << (level - 1); }

  void validate() const {
    if (depth < 1 || base_channels < 1 || image_size < 2)
      throw Error(ErrorCode::BadArgument, "inpainter depth, channels and size must be positive");
    if (image_size % (1 << depth) != 0)
      throw Error(ErrorCode::BadArgument, "image_size must be divisible by 2^depth");
    if (epochs < 0 || batch_size < 1) throw Error(ErrorCode::BadArgument, "bad epoch/batch settings");
  }
};

inline nlohmann::json to_json(const InpainterConfig& c) {
  return {{"image_size", c.image_size},       {"depth", c.depth},   {"base_channels", c.base_channels},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"batch_size", c.batch_size},
          {"single_precision", c.single_precision}, {"seed", c.seed}};
}

inline InpainterConfig inpainter_config_from_json(const nlohmann::json& j) {
  InpainterConfig c;
  c.image_size = j.at("image_size").get<int>();
  c.depth = j.at("depth").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.single_precision = j.value("single_precision", true);
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

struct InpainterModel {
  InpainterConfig config;
  nn::ParameterSet params;
};

namespace unet {

inline std::string name(const char* part, int level, const char* what) {
  return std::string(part) + std::to_string(level) + "." + what;
}

/// Output channels of decoder level l.
inline int dec_out(const InpainterConfig& c, int l) { return l == 1 ? 3 : c.channels(l - 1); }
/// Input channels of decoder level l.
inline int dec_in(const InpainterConfig& c, int l) { return l == c.depth ? c.channels(l) : 2 * c.channels(l); }

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Patches of a 4x4 stride-2 pad-1 window. `in` is C x (B*H*W); the result is
/// 16C x (B*(H/2)*(W/2)) with row (ky*4 + kx)*C + c.
template <typename S>
Mat<S> im2col(const Mat<S>& in, int batch, int h, int w) {
  const auto c = static_cast<Eigen::Index>(in.rows());
  const int ho = h / 2, wo = w / 2;
  Mat<S> cols = Mat<S>::Zero(16 * c, static_cast<Eigen::Index>(batch) * ho * wo);
  for (int b = 0; b < batch; ++b)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        S* dst = cols.data() + (static_cast<Eigen::Index>(b) * ho * wo + oy * wo + ox) * 16 * c;
        for (int ky = 0; ky < 4; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 4; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= w) continue;
            const S* src = in.data() + (static_cast<Eigen::Index>(b) * h * w + iy * w + ix) * c;
            std::copy(src, src + c, dst + (ky * 4 + kx) * c);
          }
        }
      }
  return cols;
}

/// Adjoint of im2col: scatters patches back onto a C x (B*H*W) grid.
template <typename S>
Mat<S> col2im(const Mat<S>& cols, Eigen::Index c, int batch, int h, int w) {
  const int ho = h / 2, wo = w / 2;
  Mat<S> out = Mat<S>::Zero(c, static_cast<Eigen::Index>(batch) * h * w);
  for (int b = 0; b < batch; ++b)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        const S* src = cols.data() + (static_cast<Eigen::Index>(b) * ho * wo + oy * wo + ox) * 16 * c;
        for (int ky = 0; ky < 4; ++ky) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 4; ++kx) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= w) continue;
            S* dst = out.data() + (static_cast<Eigen::Index>(b) * h * w + iy * w + ix) * c;
            const S* s = src + (ky * 4 + kx) * c;
            for (Eigen::Index k = 0; k < c; ++k) dst[k] += s[k];
          }
        }
      }
  return out;
}

inline constexpr double kLeak = 0.2;

/// Forward/backward state for one batch in precision S.
template <typename S>
class Network {
 public:
  explicit Network(const InpainterModel& model) : cfg_(model.config) {
    const int d = cfg_.depth;
    enc_w_.resize(static_cast<std::size_t>(d) + 1);
    enc_b_.resize(static_cast<std::size_t>(d) + 1);
    dec_w_.resize(static_cast<std::size_t>(d) + 1);
    dec_b_.resize(static_cast<std::size_t>(d) + 1);
    for (int l = 1; l <= d; ++l) {
      enc_w_[l] = model.params.by_name(name("enc", l, "weight")).value.cast<S>();
      enc_b_[l] = model.params.by_name(name("enc", l, "bias")).value.col(0).cast<S>();
      dec_w_[l] = model.params.by_name(name("dec", l, "weight")).value.cast<S>();
      dec_b_[l] = model.params.by_name(name("dec", l, "bias")).value.col(0).cast<S>();
    }
  }

  /// `input` is 3 x (B*S*S). Returns the sigmoid output, same shape.
  const Mat<S>& forward(const Mat<S>& input, int batch) {
    const int d = cfg_.depth;
    batch_ = batch;
    enc_.assign(static_cast<std::size_t>(d) + 1, {});
    cols_.assign(static_cast<std::size_t>(d) + 1, {});
    dec_in_.assign(static_cast<std::size_t>(d) + 1, {});
    dec_act_.assign(static_cast<std::size_t>(d) + 1, {});
    enc_[0] = input;
    int size = cfg_.image_size;
    for (int l = 1; l <= d; ++l) {
      cols_[l] = im2col<S>(enc_[l - 1], batch, size, size);
      size /= 2;
      Mat<S> z = enc_w_[l] * cols_[l];
      z.colwise() += enc_b_[l];
      enc_[l] = z.unaryExpr([](S v) { return v > S(0) ? v : S(kLeak) * v; });
    }
    dec_in_[d] = enc_[d];
    for (int l = d; l >= 1; --l) {
      const Mat<S> up_cols = dec_w_[l].transpose() * dec_in_[l];
      Mat<S> z = col2im<S>(up_cols, dec_out(cfg_, l), batch, 2 * size, 2 * size);
      z.colwise() += dec_b_[l];
      size *= 2;
      if (l > 1) {
        dec_act_[l] = z.cwiseMax(S(0));
        const Eigen::Index c = dec_act_[l].rows();
        dec_in_[l - 1].resize(2 * c, z.cols());
        dec_in_[l - 1].topRows(c) = dec_act_[l];
        dec_in_[l - 1].bottomRows(c) = enc_[l - 1];
      } else {
        output_ = z.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
      }
    }
    return output_;
  }

  /// Backpropagates dL/d(output) and adds parameter gradients (as double) to
  /// `grads`, which mirrors the model's ParameterSet order.
  void backward(const Mat<S>& d_output, InpainterModel& model) const {
    const int d = cfg_.depth;
    std::vector<Mat<S>> d_enc(static_cast<std::size_t>(d) + 1);
    Mat<S> dz = d_output.cwiseProduct(output_.unaryExpr([](S s) { return s * (S(1) - s); }));
    int size = cfg_.image_size;
    for (int l = 1; l <= d; ++l) {
      const Mat<S> dcols = im2col<S>(dz, batch_, size, size);
      size /= 2;
      auto& gw = model.params.by_name(name("dec", l, "weight")).grad;
      auto& gb = model.params.by_name(name("dec", l, "bias")).grad;
      gw += (dec_in_[l] * dcols.transpose()).template cast<double>();
      gb.col(0) += dz.rowwise().sum().template cast<double>();
      Mat<S> d_in = dec_w_[l] * dcols;
      if (l == d) {
        d_enc[d] = std::move(d_in);
      } else {
        const Eigen::Index c = d_in.rows() / 2;
        d_enc[l] = d_in.bottomRows(c);
        const Mat<S>& act = dec_act_[l + 1];
        dz = d_in.topRows(c).cwiseProduct(act.unaryExpr([](S v) { return v > S(0) ? S(1) : S(0); }));
      }
    }
    // size now equals the bottleneck resolution
    for (int l = d; l >= 1; --l) {
      const Mat<S> dpre =
          d_enc[l].cwiseProduct(enc_[l].unaryExpr([](S v) { return v > S(0) ? S(1) : S(kLeak); }));
      auto& gw = model.params.by_name(name("enc", l, "weight")).grad;
      auto& gb = model.params.by_name(name("enc", l, "bias")).grad;
      gw += (dpre * cols_[l].transpose()).template cast<double>();
      gb.col(0) += dpre.rowwise().sum().template cast<double>();
      size *= 2;
      if (l > 1) {
        const Mat<S> dcols = enc_w_[l].transpose() * dpre;
        d_enc[l - 1] += col2im<S>(dcols, enc_[l - 1].rows(), batch_, size, size);
      }
    }
  }

  const Mat<S>& output() const { return output_; }

 private:
  InpainterConfig cfg_;
  std::vector<Mat<S>> enc_w_, dec_w_;
  std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1>> enc_b_, dec_b_;
  int batch_ = 0;
  std::vector<Mat<S>> enc_, cols_, dec_in_, dec_act_;
  Mat<S> output_;
};

template <typename S>
Mat<S> stack_images(std::span<const Image* const> images) {
  const Eigen::Index pixels = static_cast<Eigen::Index>(images.front()->width()) * images.front()->height();
  Mat<S> m(3, pixels * static_cast<Eigen::Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i)
    m.middleCols(static_cast<Eigen::Index>(i) * pixels, pixels) =
        Eigen::Map<const Eigen::MatrixXd>(images[i]->data().data(), 3, pixels).cast<S>();
  return m;
}

}  // namespace unet

/// Seeded He-uniform initialisation; biases zero.
inline InpainterModel init_inpainter(const InpainterConfig& cfg) {
  cfg.validate();
  InpainterModel m;
  m.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  for (int l = 1; l <= cfg.depth; ++l) {
    const int cin = cfg.channels(l - 1), cout = cfg.channels(l);
    auto& w = m.params.add(unet::name("enc", l, "weight"), {cout, 4, 4, cin}, cout, 16 * cin);
    nn::uniform_init(w.value, std::sqrt(6.0 / ((1.0 + unet::kLeak * unet::kLeak) * 16.0 * cin)), rng);
    m.params.add(unet::name("enc", l, "bias"), {cout}, cout, 1);
  }
  for (int l = cfg.depth; l >= 1; --l) {
    const int cin = unet::dec_in(cfg, l), cout = unet::dec_out(cfg, l);
    auto& w = m.params.add(unet::name("dec", l, "weight"), {cin, 4, 4, cout}, cin, 16 * cout);
    // each output pixel of a stride-2 transposed 4x4 conv sees 4 taps per input channel
    nn::uniform_init(w.value, std::sqrt(6.0 / (4.0 * cin)), rng);
    m.params.add(unet::name("dec", l, "bias"), {cout}, cout, 1);
  }
  return m;
}

inline void check_image_size(const Image& img, const InpainterConfig& cfg) {
  if (img.width() != cfg.image_size || img.height() != cfg.image_size)
    throw Error(ErrorCode::SizeMismatch, "image is " + std::to_string(img.width()) + "x" +
                                             std::to_string(img.height()) + ", model expects " +
                                             std::to_string(cfg.image_size));
}

/// Mean absolute error over every pixel and channel of the batch. With
/// `accumulate_grad`, adds dLoss/dParams to the model's gradient buffers.
template <typename S>
double inpainter_objective(InpainterModel& model, std::span<const ConditionedPair* const> batch,
                           bool accumulate_grad) {
  std::vector<const Image*> inputs, targets;
  for (const auto* p : batch) {
    check_image_size(p->input, model.config);
    check_image_size(p->target, model.config);
    inputs.push_back(&p->input);
    targets.push_back(&p->target);
  }
  unet::Network<S> net(model);
  const auto& out = net.forward(unet::stack_images<S>(inputs), static_cast<int>(batch.size()));
  const unet::Mat<S> target = unet::stack_images<S>(targets);
  const double n = static_cast<double>(out.size());
  const unet::Mat<S> diff = out - target;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) loss += std::abs(static_cast<double>(diff.data()[i]));
  loss /= n;
  if (accumulate_grad) {
    const S inv = static_cast<S>(1.0 / n);
    const unet::Mat<S> d_out = diff.unaryExpr([inv](S v) { return v > S(0) ? inv : (v < S(0) ? -inv : S(0)); });
    net.backward(d_out, model);
  }
  return loss;
}

inline double inpainter_objective(InpainterModel& model, std::span<const ConditionedPair* const> batch,
                                  bool accumulate_grad) {
  return model.config.single_precision ? inpainter_objective<float>(model, batch, accumulate_grad)
                                       : inpainter_objective<double>(model, batch, accumulate_grad);
}

struct InpainterTrainResult {
  InpainterModel model;
  std::vector<double> loss_history;  // mean training L1 over each epoch's batches
};

inline InpainterTrainResult train_inpainter(std::span<const ConditionedPair> pairs, const InpainterConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training pairs");
  for (const auto& p : pairs) {
    check_image_size(p.input, cfg);
    check_image_size(p.target, cfg);
  }
  InpainterTrainResult res{init_inpainter(cfg), {}};
  auto& m = res.model;
  nn::Adam adam(m.params, {.learning_rate = cfg.learning_rate});
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<const ConditionedPair*> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
    double total = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(&pairs[order[k]]);
      m.params.zero_grad();
      total += inpainter_objective(m, batch, true) * static_cast<double>(batch.size());
      seen += batch.size();
      adam.step(m.params);
    }
    res.loss_history.push_back(total / static_cast<double>(seen));
  }
  m.params.zero_grad();
  return res;
}

/// Pure function of (model, input): no state carries over between frames.
inline Image infer_frame(const InpainterModel& model, const Image& input) {
  check_image_size(input, model.config);
  const Image* one[] = {&input};
  Image out(input.width(), input.height());
  auto run = [&]<typename S>(S) {
    unet::Network<S> net(model);
    const auto& y = net.forward(unet::stack_images<S>(one), 1);
    for (Eigen::Index i = 0; i < y.size(); ++i)
      out.data()[static_cast<std::size_t>(i)] = std::clamp(static_cast<double>(y.data()[i]), 0.0, 1.0);
  };
  if (model.config.single_precision) run(float{});
  else run(double{});
  return out;
}

inline double mean_l1(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw Error(ErrorCode::SizeMismatch, "image sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.data().size());
}

inline nlohmann::json to_json(const InpainterModel& m, std::span<const double> loss_history = {}) {
  return {{"kind", "inpainter"},
          {"config", to_json(m.config)},
          {"stats", nlohmann::json::object()},
          {"tensors", nn::tensors_to_json(m.params)},
          {"loss_history", std::vector<double>(loss_history.begin(), loss_history.end())}};
}

inline InpainterModel inpainter_from_json(const nlohmann::json& j) {
  try {
    if (j.value("kind", "") != "inpainter") throw Error(ErrorCode::ParseError, "checkpoint is not an inpainter");
    InpainterModel m = init_inpainter(inpainter_config_from_json(j.at("config")));
    nn::tensors_from_json(j.at("tensors"), m.params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("inpainter checkpoint: ") + e.what());
  }
}

}  // namespace lipsync
