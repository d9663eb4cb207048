#pragma once

// Independent reference implementations used as oracles by the tests.

#include <random>

#include <Eigen/Dense>

#include "capnet/core.hpp"

namespace testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

// Modified Gram-Schmidt with one reorthogonalization pass; columns whose
// residual falls below tol * (largest column norm) are dropped.
inline MatrixXd gram_schmidt(const MatrixXd& a, double tol = 1e-9) {
  double scale = 0.0;
  for (Index j = 0; j < a.cols(); ++j) scale = std::max(scale, a.col(j).norm());
  MatrixXd q(a.rows(), 0);
  for (Index j = 0; j < a.cols(); ++j) {
    VectorXd v = a.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < q.cols(); ++k) v -= q.col(k).dot(v) * q.col(k);
    }
    if (v.norm() > tol * scale) {
      q.conservativeResize(Eigen::NoChange, q.cols() + 1);
      q.col(q.cols() - 1) = v / v.norm();
    }
  }
  return q;
}

inline MatrixXd random_orthonormal(std::mt19937_64& rng, Index n, Index k) {
  return gram_schmidt(gaussian_matrix(rng, n, k));
}

inline MatrixXd unit_columns(MatrixXd m) {
  for (Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

inline MatrixXd random_psd(std::mt19937_64& rng, Index n) {
  const MatrixXd a = gaussian_matrix(rng, n, n);
  return a * a.transpose() / double(n) + 0.1 * MatrixXd::Identity(n, n);
}

// Column-stochastic matrix with strictly positive entries.
inline MatrixXd random_stochastic(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    m.col(j) /= m.col(j).sum();
  }
  return m;
}

}  // namespace testing
