#pragma once

// Time-delayed recurrent regression from audio features to PCA mouth
// coefficients. A stack of unidirectional LSTM layers reads one feature frame
// per step; a linear head emits k coefficients. The target at step t is the
// coefficient vector d frames earlier, so the output for frame j is read at
// step j + d and sees d frames of audio lookahead.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/error.hpp"
#include "lipsync/nn.hpp"

namespace lipsync {

struct PredictorConfig {
  int input_dim = 26;
  int output_dim = 5;
  int hidden_size = 60;
  int layers = 1;
  int delay_frames = 20;
  double learning_rate = 5e-3;
  int epochs = 50;
  int batch_size = 1;  // sequences per update
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim < 1 || output_dim < 1) throw Error(ErrorCode::BadArgument, "predictor dims must be >= 1");
    if (hidden_size < 1) throw Error(ErrorCode::BadArgument, "hidden_size must be >= 1");
    if (layers < 1) throw Error(ErrorCode::BadArgument, "layers must be >= 1");
    if (delay_frames < 0) throw Error(ErrorCode::BadArgument, "delay must be >= 0");
    if (epochs < 0 || batch_size < 1) throw Error(ErrorCode::BadArgument, "bad epoch/batch settings");
  }
};

inline nlohmann::json to_json(const PredictorConfig& c) {
  return {{"input_dim", c.input_dim},         {"output_dim", c.output_dim}, {"hidden_size", c.hidden_size},
          {"layers", c.layers},               {"delay_frames", c.delay_frames},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"clip_norm", c.clip_norm},         {"seed", c.seed}};
}

inline PredictorConfig predictor_config_from_json(const nlohmann::json& j) {
  PredictorConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.output_dim = j.at("output_dim").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.layers = j.at("layers").get<int>();
  c.delay_frames = j.at("delay_frames").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.value("batch_size", 1);
  c.clip_norm = j.value("clip_norm", 0.0);
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// One training sequence: T x F features and T x k targets.
struct SequencePair {
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;

  int length() const { return static_cast<int>(features.rows()); }
};

/// Network-side view of a delayed sequence: `targets.row(t)` holds y_{t-d} for
/// t >= first_loss_step; rows before that carry no loss and are zero.
struct DelayedPair {
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;
  int first_loss_step = 0;
};

inline DelayedPair apply_time_delay(const SequencePair& pair, int delay) {
  const int t_len = pair.length();
  if (delay < 0) throw Error(ErrorCode::BadArgument, "delay must be >= 0");
  if (pair.targets.rows() != t_len) throw Error(ErrorCode::ShapeMismatch, "features and targets differ in length");
  if (delay >= t_len)
    throw Error(ErrorCode::DelayTooLarge, "delay " + std::to_string(delay) + " >= sequence length " + std::to_string(t_len));
  DelayedPair out;
  out.features = pair.features;
  out.targets = Eigen::MatrixXd::Zero(t_len, pair.targets.cols());
  out.targets.bottomRows(t_len - delay) = pair.targets.topRows(t_len - delay);
  out.first_loss_step = delay;
  return out;
}

/// Realigns raw network outputs (row t = step t) to frame order: frame j takes
/// step j + d; the last d frames repeat the final step.
inline Eigen::MatrixXd shift_back(const Eigen::MatrixXd& steps, int delay) {
  const Eigen::Index t_len = steps.rows();
  Eigen::MatrixXd frames(t_len, steps.cols());
  for (Eigen::Index j = 0; j < t_len; ++j) frames.row(j) = steps.row(std::min(j + delay, t_len - 1));
  return frames;
}

struct PredictorModel {
  PredictorConfig config;
  nn::ParameterSet params;
  Eigen::VectorXd in_mean, in_std, out_mean, out_std;
};

namespace predictor_detail {

inline std::string layer_name(int l, const char* what) { return "lstm" + std::to_string(l) + "." + what; }

struct LayerCache {
  Eigen::MatrixXd inputs;  // D x T
  Eigen::MatrixXd gates;   // 4H x T, activated (i, f, g, o)
  Eigen::MatrixXd cells;   // H x T
  Eigen::MatrixXd hidden;  // H x T
};

/// Forward pass over one standardized sequence (T x F). Returns T x k outputs.
inline Eigen::MatrixXd forward(const PredictorModel& m, const Eigen::MatrixXd& x, std::vector<LayerCache>* caches) {
  const int hs = m.config.hidden_size;
  const Eigen::Index t_len = x.rows();
  Eigen::MatrixXd layer_in = x.transpose();  // D x T
  if (caches) caches->assign(static_cast<std::size_t>(m.config.layers), {});
  for (int l = 0; l < m.config.layers; ++l) {
    const auto& w = m.params.by_name(layer_name(l, "weight")).value;  // 4H x (D + H)
    const auto& b = m.params.by_name(layer_name(l, "bias")).value;    // 4H x 1
    const Eigen::Index d_in = layer_in.rows();
    Eigen::MatrixXd pre = w.leftCols(d_in) * layer_in;
    pre.colwise() += b.col(0);
    Eigen::MatrixXd gates(4 * hs, t_len), cells(hs, t_len), hidden(hs, t_len);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hs), c = Eigen::VectorXd::Zero(hs);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      Eigen::VectorXd z = pre.col(t) + w.rightCols(hs) * h;
      for (int r = 0; r < hs; ++r) {
        z[r] = nn::sigmoid(z[r]);
        z[hs + r] = nn::sigmoid(z[hs + r]);
        z[2 * hs + r] = std::tanh(z[2 * hs + r]);
        z[3 * hs + r] = nn::sigmoid(z[3 * hs + r]);
      }
      c = z.segment(hs, hs).cwiseProduct(c) + z.head(hs).cwiseProduct(z.segment(2 * hs, hs));
      h = z.tail(hs).cwiseProduct(c.array().tanh().matrix());
      gates.col(t) = z;
      cells.col(t) = c;
      hidden.col(t) = h;
    }
    if (caches) (*caches)[static_cast<std::size_t>(l)] = {layer_in, gates, cells, hidden};
    layer_in = std::move(hidden);
  }
  const auto& wy = m.params.by_name("out.weight").value;
  const auto& by = m.params.by_name("out.bias").value;
  Eigen::MatrixXd y = wy * layer_in;
  y.colwise() += by.col(0);
  return y.transpose();
}

/// Accumulates gradients of sum_{t,j} weight * (y - target)^2 over loss steps.
inline void backward(PredictorModel& m, const std::vector<LayerCache>& caches, const Eigen::MatrixXd& y,
                     const DelayedPair& target, double weight) {
  const int hs = m.config.hidden_size;
  const Eigen::Index t_len = y.rows();
  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(y.cols(), t_len);  // k x T
  for (Eigen::Index t = target.first_loss_step; t < t_len; ++t)
    dy.col(t) = (2.0 * weight) * (y.row(t) - target.targets.row(t)).transpose();

  auto& wy = m.params.by_name("out.weight");
  auto& by = m.params.by_name("out.bias");
  const auto& top = caches.back();
  wy.grad += dy * top.hidden.transpose();
  by.grad.col(0) += dy.rowwise().sum();
  Eigen::MatrixXd dh_above = wy.value.transpose() * dy;  // H x T

  for (int l = m.config.layers - 1; l >= 0; --l) {
    const auto& cache = caches[static_cast<std::size_t>(l)];
    auto& w = m.params.by_name(layer_name(l, "weight"));
    auto& b = m.params.by_name(layer_name(l, "bias"));
    const Eigen::Index d_in = cache.inputs.rows();
    Eigen::MatrixXd dz(4 * hs, t_len);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hs), dc_next = Eigen::VectorXd::Zero(hs);
    const auto w_rec = w.value.rightCols(hs);
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const auto g = cache.gates.col(t);
      const Eigen::VectorXd c = cache.cells.col(t);
      const Eigen::VectorXd c_prev = t > 0 ? Eigen::VectorXd(cache.cells.col(t - 1)) : Eigen::VectorXd::Zero(hs);
      const Eigen::VectorXd tc = c.array().tanh().matrix();
      const Eigen::VectorXd dh = dh_above.col(t) + dh_next;
      Eigen::VectorXd dc = dc_next;
      for (int r = 0; r < hs; ++r) {
        const double i = g[r], f = g[hs + r], gg = g[2 * hs + r], o = g[3 * hs + r];
        dc[r] += dh[r] * o * (1.0 - tc[r] * tc[r]);
        dz(r, t) = dc[r] * gg * i * (1.0 - i);
        dz(hs + r, t) = dc[r] * c_prev[r] * f * (1.0 - f);
        dz(2 * hs + r, t) = dc[r] * i * (1.0 - gg * gg);
        dz(3 * hs + r, t) = dh[r] * tc[r] * o * (1.0 - o);
        dc_next[r] = dc[r] * f;
      }
      dh_next = w_rec.transpose() * dz.col(t);
    }
    // h_{t-1} for every step, zero at t = 0
    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(hs, t_len);
    if (t_len > 1) h_prev.rightCols(t_len - 1) = cache.hidden.leftCols(t_len - 1);
    w.grad.leftCols(d_in) += dz * cache.inputs.transpose();
    w.grad.rightCols(hs) += dz * h_prev.transpose();
    b.grad.col(0) += dz.rowwise().sum();
    if (l > 0) dh_above = w.value.leftCols(d_in).transpose() * dz;
  }
}

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
  return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

inline void column_stats(std::span<const Eigen::MatrixXd* const> mats, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
  const Eigen::Index dim = mats.front()->cols();
  mean = Eigen::VectorXd::Zero(dim);
  Eigen::Index n = 0;
  for (const auto* m : mats) {
    mean += m->colwise().sum().transpose();
    n += m->rows();
  }
  mean /= static_cast<double>(n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto* m : mats) var += (m->rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
  var /= static_cast<double>(n);
  std = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (!(std[i] > 1e-8)) std[i] = 1.0;
}

}  // namespace predictor_detail

/// Seeded initialisation: LSTM and head weights U(-1/sqrt(H), 1/sqrt(H)),
/// biases zero except the forget gate (1). Statistics default to identity.
inline PredictorModel init_predictor(const PredictorConfig& cfg) {
  cfg.validate();
  PredictorModel m;
  m.config = cfg;
  const int hs = cfg.hidden_size;
  std::mt19937_64 rng(cfg.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hs));
  for (int l = 0; l < cfg.layers; ++l) {
    const int d_in = l == 0 ? cfg.input_dim : hs;
    auto& w = m.params.add(predictor_detail::layer_name(l, "weight"), {4 * hs, d_in + hs}, 4 * hs, d_in + hs);
    nn::uniform_init(w.value, bound, rng);
    auto& b = m.params.add(predictor_detail::layer_name(l, "bias"), {4 * hs}, 4 * hs, 1);
    b.value.block(hs, 0, hs, 1).setConstant(1.0);
  }
  auto& wy = m.params.add("out.weight", {cfg.output_dim, hs}, cfg.output_dim, hs);
  nn::uniform_init(wy.value, bound, rng);
  m.params.add("out.bias", {cfg.output_dim}, cfg.output_dim, 1);
  m.in_mean = Eigen::VectorXd::Zero(cfg.input_dim);
  m.in_std = Eigen::VectorXd::Ones(cfg.input_dim);
  m.out_mean = Eigen::VectorXd::Zero(cfg.output_dim);
  m.out_std = Eigen::VectorXd::Ones(cfg.output_dim);
  return m;
}

inline void check_pairs(std::span<const SequencePair> pairs, const PredictorConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyDataset, "no training sequences");
  for (const auto& p : pairs) {
    if (p.features.cols() != cfg.input_dim || p.targets.cols() != cfg.output_dim ||
        p.targets.rows() != p.features.rows())
      throw Error(ErrorCode::ShapeMismatch, "sequence dimensions do not match the predictor config");
    if (p.length() <= cfg.delay_frames)
      throw Error(ErrorCode::DelayTooLarge, "sequence of length " + std::to_string(p.length()) +
                                                " is not longer than the delay");
  }
}

/// Mean squared error (standardized units) over all loss steps of `pairs`;
/// when `accumulate_grad` is set, adds its gradient to the model's tensors.
inline double predictor_objective(PredictorModel& m, std::span<const SequencePair> pairs, bool accumulate_grad) {
  const int d = m.config.delay_frames;
  std::size_t count = 0;
  for (const auto& p : pairs) count += static_cast<std::size_t>(p.length() - d) * static_cast<std::size_t>(m.config.output_dim);
  const double weight = 1.0 / static_cast<double>(count);
  double loss = 0.0;
  std::vector<predictor_detail::LayerCache> caches;
  for (const auto& p : pairs) {
    SequencePair std_pair{predictor_detail::standardize(p.features, m.in_mean, m.in_std),
                          predictor_detail::standardize(p.targets, m.out_mean, m.out_std)};
    const DelayedPair aligned = apply_time_delay(std_pair, d);
    const Eigen::MatrixXd y = predictor_detail::forward(m, aligned.features, accumulate_grad ? &caches : nullptr);
    loss += weight * (y.bottomRows(y.rows() - d) - aligned.targets.bottomRows(y.rows() - d)).squaredNorm();
    if (accumulate_grad) predictor_detail::backward(m, caches, y, aligned, weight);
  }
  return loss;
}

struct PredictorTrainResult {
  PredictorModel model;
  std::vector<double> loss_history;  // training MSE after each epoch
};

/// Adam on mini-batches of whole sequences in a seeded order. Inputs and
/// targets are standardized with statistics of the training set.
inline PredictorTrainResult train_predictor(std::span<const SequencePair> pairs, const PredictorConfig& cfg) {
  cfg.validate();
  check_pairs(pairs, cfg);
  PredictorTrainResult res{init_predictor(cfg), {}};
  PredictorModel& m = res.model;

  std::vector<const Eigen::MatrixXd*> feats, targs;
  for (const auto& p : pairs) {
    feats.push_back(&p.features);
    targs.push_back(&p.targets);
  }
  predictor_detail::column_stats(feats, m.in_mean, m.in_std);
  predictor_detail::column_stats(targs, m.out_mean, m.out_std);

  nn::Adam adam(m.params, {.learning_rate = cfg.learning_rate, .clip_norm = cfg.clip_norm});
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<SequencePair> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++k)
        batch.push_back(pairs[order[k]]);
      m.params.zero_grad();
      predictor_objective(m, batch, true);
      adam.step(m.params);
    }
    res.loss_history.push_back(predictor_objective(m, pairs, false));
  }
  m.params.zero_grad();
  return res;
}

/// T x k coefficients in original units, aligned to input frames.
inline Eigen::MatrixXd predict_coeffs(const PredictorModel& m, const Eigen::MatrixXd& features) {
  if (features.cols() != m.config.input_dim)
    throw Error(ErrorCode::ShapeMismatch, "feature dimension " + std::to_string(features.cols()) +
                                              " does not match model input " + std::to_string(m.config.input_dim));
  if (features.rows() < 1) throw Error(ErrorCode::TooShort, "empty feature sequence");
  const Eigen::MatrixXd x = predictor_detail::standardize(features, m.in_mean, m.in_std);
  const Eigen::MatrixXd steps = predictor_detail::forward(m, x, nullptr);
  Eigen::MatrixXd frames = shift_back(steps, m.config.delay_frames);
  frames = (frames.array().rowwise() * m.out_std.transpose().array()).matrix();
  frames.rowwise() += m.out_mean.transpose();
  return frames;
}

inline nlohmann::json to_json(const PredictorModel& m, std::span<const double> loss_history = {}) {
  using nn::to_vector;
  return {{"kind", "keypoint_predictor"},
          {"config", to_json(m.config)},
          {"stats",
           {{"in_mean", to_vector(m.in_mean)},
            {"in_std", to_vector(m.in_std)},
            {"out_mean", to_vector(m.out_mean)},
            {"out_std", to_vector(m.out_std)}}},
          {"tensors", nn::tensors_to_json(m.params)},
          {"loss_history", std::vector<double>(loss_history.begin(), loss_history.end())}};
}

inline PredictorModel predictor_from_json(const nlohmann::json& j) {
  try {
    if (j.value("kind", "") != "keypoint_predictor")
      throw Error(ErrorCode::ParseError, "checkpoint is not a keypoint predictor");
    PredictorModel m = init_predictor(predictor_config_from_json(j.at("config")));
    const auto& s = j.at("stats");
    m.in_mean = nn::vector_from_json(s.at("in_mean"));
    m.in_std = nn::vector_from_json(s.at("in_std"));
    m.out_mean = nn::vector_from_json(s.at("out_mean"));
    m.out_std = nn::vector_from_json(s.at("out_std"));
    if (m.in_mean.size() != m.config.input_dim || m.out_mean.size() != m.config.output_dim ||
        m.in_std.size() != m.config.input_dim || m.out_std.size() != m.config.output_dim)
      throw Error(ErrorCode::ShapeMismatch, "checkpoint statistics do not match config");
    nn::tensors_from_json(j.at("tensors"), m.params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("predictor checkpoint: ") + e.what());
  }
}

}  // namespace lipsync
