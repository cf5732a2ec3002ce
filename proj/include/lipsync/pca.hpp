#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync/error.hpp"

namespace lipsync {

struct PcaBasis {
  Eigen::VectorXd mean;        // D
  Eigen::MatrixXd components;  // k x D, orthonormal rows, descending variance
  Eigen::VectorXd variances;   // k
  double total_variance = 0.0;

  int k() const { return static_cast<int>(components.rows()); }
  int dim() const { return static_cast<int>(mean.size()); }

  double explained_ratio(int i) const { return variances[i] / total_variance; }
  double cumulative_ratio(int count) const {
    return variances.head(count).sum() / total_variance;
  }
};

/// Flips each component so its largest-magnitude entry is positive
/// (first index wins on ties).
inline void canonicalize_signs(Eigen::MatrixXd& components) {
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < components.cols(); ++c)
      if (std::abs(components(r, c)) > std::abs(components(r, best))) best = c;
    if (components(r, best) < 0) components.row(r) *= -1.0;
  }
}

/// Eigendecomposition of the sample covariance (divisor N-1) of the rows of
/// `samples`.
inline PcaBasis fit_pca(const Eigen::MatrixXd& samples, int k) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (k < 1 || k > d) throw Error(ErrorCode::BadRank, "k must be in [1, " + std::to_string(d) + "]");
  if (n < 2) throw Error(ErrorCode::BadArgument, "PCA needs at least two samples");
  if (!samples.allFinite()) throw Error(ErrorCode::BadArgument, "PCA samples contain non-finite values");

  PcaBasis basis;
  basis.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - basis.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  basis.total_variance = cov.trace();
  if (!(basis.total_variance > 1e-12)) throw Error(ErrorCode::DegenerateData, "samples have zero variance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::DegenerateData, "eigensolver failed");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& values = eig.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });

  basis.components.resize(k, d);
  basis.variances.resize(k);
  for (int i = 0; i < k; ++i) {
    basis.components.row(i) = eig.eigenvectors().col(order[static_cast<std::size_t>(i)]).transpose();
    basis.variances[i] = std::max(0.0, values[order[static_cast<std::size_t>(i)]]);
  }
  canonicalize_signs(basis.components);
  return basis;
}

inline Eigen::VectorXd project(const PcaBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& shape) {
  if (shape.size() != basis.dim()) throw Error(ErrorCode::ShapeMismatch, "shape length does not match basis");
  return basis.components * (shape - basis.mean);
}

inline Eigen::VectorXd reconstruct(const PcaBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& coeffs) {
  if (coeffs.size() != basis.k()) throw Error(ErrorCode::ShapeMismatch, "coefficient count does not match basis");
  return basis.mean + basis.components.transpose() * coeffs;
}

inline nlohmann::json to_json(const PcaBasis& basis) {
  nlohmann::json j;
  j["k"] = basis.k();
  j["mean"] = std::vector<double>(basis.mean.data(), basis.mean.data() + basis.mean.size());
  auto rows = nlohmann::json::array();
  for (int r = 0; r < basis.k(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(basis.dim()));
    for (int c = 0; c < basis.dim(); ++c) row[static_cast<std::size_t>(c)] = basis.components(r, c);
    rows.push_back(row);
  }
  j["components"] = rows;
  j["variances"] = std::vector<double>(basis.variances.data(), basis.variances.data() + basis.k());
  j["total_variance"] = basis.total_variance;
  return j;
}

inline PcaBasis pca_from_json(const nlohmann::json& j) {
  try {
    PcaBasis b;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto rows = j.at("components").get<std::vector<std::vector<double>>>();
    const auto vars = j.at("variances").get<std::vector<double>>();
    const int k = j.at("k").get<int>();
    if (k < 1 || rows.size() != static_cast<std::size_t>(k) || vars.size() != static_cast<std::size_t>(k))
      throw Error(ErrorCode::ParseError, "pca basis: inconsistent k");
    b.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    b.components.resize(k, static_cast<Eigen::Index>(mean.size()));
    for (int r = 0; r < k; ++r) {
      if (rows[static_cast<std::size_t>(r)].size() != mean.size())
        throw Error(ErrorCode::ParseError, "pca basis: component length mismatch");
      for (std::size_t c = 0; c < mean.size(); ++c) b.components(r, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(r)][c];
    }
    b.variances = Eigen::Map<const Eigen::VectorXd>(vars.data(), k);
    b.total_variance = j.at("total_variance").get<double>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("pca basis: ") + e.what());
  }
}

inline void save_pca(const std::filesystem::path& path, const PcaBasis& basis) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(basis).dump() << '\n';
}

inline PcaBasis load_pca(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return pca_from_json(j);
}

}  // namespace lipsync
