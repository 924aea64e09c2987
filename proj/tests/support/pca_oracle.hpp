#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tsaug/pca.hpp"
#include "tsaug/rng.hpp"

namespace tsaug::testing {

// Anisotropic Gaussian cloud: n points in d dimensions along a random
// orthonormal frame with decreasing scales, so the top-2 subspace is well
// separated from the rest.
inline Matrix random_cloud(std::size_t n, std::size_t d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Matrix pts(n, std::vector<double>(d, 0.0));
  const double shift = rng.normal(0.0, 3.0);
  for (auto& p : pts) {
    for (std::size_t k = 0; k < d; ++k) {
      const double scale = k == 0 ? 5.0 : k == 1 ? 2.5 : 0.5 / static_cast<double>(k);
      const double c = rng.normal(0.0, scale);
      for (std::size_t j = 0; j < d; ++j) p[j] += c * q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
    }
    for (double& v : p) v += shift;
  }
  return pts;
}

// Top-k eigenvectors of the sample covariance, as columns, from Eigen's
// self-adjoint solver.
inline Eigen::MatrixXd oracle_subspace(const Matrix& pts, Eigen::Index k) {
  const auto n = static_cast<Eigen::Index>(pts.size()), d = static_cast<Eigen::Index>(pts[0].size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = pts[i][j];
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  return es.eigenvectors().rightCols(k).rowwise().reverse();
}

// Largest principal angle between span(rows of a) and span(columns of b),
// computed as asin of the spectral norm of the residual of projecting a onto b.
inline double max_principal_angle(const Matrix& a, const Eigen::MatrixXd& b) {
  const auto k = static_cast<Eigen::Index>(a.size()), d = static_cast<Eigen::Index>(a[0].size());
  Eigen::MatrixXd u(d, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index j = 0; j < d; ++j) u(j, c) = a[c][j];
  const Eigen::MatrixXd residual = u - b * (b.transpose() * u);
  const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(residual).singularValues()(0);
  return std::asin(std::min(1.0, s));
}

}  // namespace tsaug::testing
