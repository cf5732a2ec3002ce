#pragma once

// Named parameter tensors, Adam, seeded initialisation and the checkpoint.json
// tensor format shared by both networks.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/error.hpp"

namespace lipsync::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A parameter stored as a 2-D matrix; `shape` is the logical shape written to
/// checkpoints (e.g. {out, in, 4, 4} for a convolution kernel).
struct Tensor {
  std::string name;
  std::vector<int> shape;
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(std::string n, std::vector<int> logical_shape, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), shape(std::move(logical_shape)), value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
};

class ParameterSet {
 public:
  Tensor& add(std::string name, std::vector<int> shape, Eigen::Index rows, Eigen::Index cols) {
    tensors_.emplace_back(std::move(name), std::move(shape), rows, cols);
    return tensors_.back();
  }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  Tensor& at(std::size_t i) { return tensors_[i]; }
  const Tensor& at(std::size_t i) const { return tensors_[i]; }

  Tensor& by_name(const std::string& name) {
    for (auto& t : tensors_)
      if (t.name == name) return t;
    throw Error(ErrorCode::BadArgument, "no tensor named " + name);
  }
  const Tensor& by_name(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->by_name(name);
  }

  void zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
  }

  bool finite() const {
    for (const auto& t : tensors_)
      if (!t.value.allFinite()) return false;
    return true;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
      const auto& x = a.tensors_[i];
      const auto& y = b.tensors_[i];
      if (x.name != y.name || x.shape != y.shape || x.value.rows() != y.value.rows() ||
          x.value.cols() != y.value.cols() || x.value != y.value)
        return false;
    }
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
};

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Fills with U(-bound, bound) in storage order.
inline void uniform_init(Matrix& m, double bound, std::mt19937_64& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * unit_uniform(rng) - 1.0) * bound;
}

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

class Adam {
 public:
  Adam(const ParameterSet& params, AdamOptions opt) : opt_(opt) {
    for (const auto& t : params.tensors()) {
      m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
      v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    }
  }

  void step(ParameterSet& params) {
    ++step_;
    double scale = 1.0;
    if (opt_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& t : params.tensors()) sq += t.grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > opt_.clip_norm) scale = opt_.clip_norm / norm;
    }
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    const double lr = opt_.learning_rate * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < params.tensors().size(); ++i) {
      auto& t = params.at(i);
      const Matrix g = t.grad * scale;
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      t.value.array() -= lr * m_[i].array() / (v_[i].array().sqrt() + opt_.epsilon);
    }
  }

 private:
  AdamOptions opt_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

/// {name: {"shape": [...], "data": [...]}}; data is the row-major flattening
/// of the logical shape, which equals the row-major order of the matrix.
inline nlohmann::json tensors_to_json(const ParameterSet& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& t : params.tensors()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) data.push_back(t.value(r, c));
    j[t.name] = {{"shape", t.shape}, {"data", data}};
  }
  return j;
}

/// Loads values into an already-shaped parameter set.
inline void tensors_from_json(const nlohmann::json& j, ParameterSet& params) {
  for (auto& t : params.tensors()) {
    if (!j.contains(t.name)) throw Error(ErrorCode::ParseError, "checkpoint lacks tensor " + t.name);
    const auto& e = j.at(t.name);
    if (e.at("shape").get<std::vector<int>>() != t.shape)
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor " + t.name + " has a different shape");
    const auto data = e.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(t.size()))
      throw Error(ErrorCode::ParseError, "checkpoint tensor " + t.name + " has wrong length");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = data[k++];
  }
}

inline std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace lipsync::nn
