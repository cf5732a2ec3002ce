// Renders a few synthetic faces, fits a mouth PCA and prints how much shape
// variance each component explains, then reconstructs one mouth.

#include <cmath>
#include <cstdio>
#include <span>

#include "lipsync.hpp"

int main() {
  using namespace lipsync;
  const auto corpus = sample_corpus(7, 400, 3);
  Eigen::MatrixXd shapes(static_cast<Eigen::Index>(corpus.size()), kMouthShapeDim);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto s = mouth_shape(corpus[i].landmarks);
    for (std::size_t j = 0; j < kMouthShapeDim; ++j) shapes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[j];
  }
  const auto basis = fit_pca(shapes, 5);
  for (int c = 0; c < basis.k(); ++c)
    std::printf("component %d  explained %.6f  cumulative %.6f\n", c, basis.explained_ratio(c), basis.cumulative_ratio(c + 1));

  const auto face = normalize(corpus[0].landmarks);
  const auto shape = mouth_shape(face);
  const Eigen::VectorXd coeffs = project(basis, Eigen::Map<const Eigen::VectorXd>(shape.data(), kMouthShapeDim));
  const Eigen::VectorXd back = reconstruct(basis, coeffs);
  const auto mouth = denormalize(std::span<const double, kMouthShapeDim>(back.data(), kMouthShapeDim), face.params);
  double worst = 0;
  for (std::size_t i = 0; i < kNumMouth; ++i) {
    const auto d = mouth[i] - corpus[0].landmarks[kMouthBegin + i];
    worst = std::max(worst, std::hypot(d.x, d.y));
  }
  std::printf("max mouth reconstruction error: %.3g px\n", worst);
  write_ppm("demo_face.ppm", corpus[0].image);
  return 0;
}
