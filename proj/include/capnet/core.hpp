#pragma once

// Linear-algebra semantics of capacity: orthonormal capacity bases, subspace
// capacities and spatial profiles. Header-only and templated on the scalar
// type; every operation is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "capnet/errors.hpp"

namespace capnet {

using Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Relative singular-value threshold used for numerical rank decisions.
inline constexpr double kDefaultRankTol = 1e-10;

namespace detail {

// Orthonormality tolerance for bases produced by our own factorizations.
template <typename Scalar>
Scalar factorization_tol() {
  return std::max(Scalar(1e-9), Scalar(1000) * std::numeric_limits<Scalar>::epsilon());
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw InputError(std::string(what) + ": non-finite entries");
  }
}

template <typename Derived>
bool has_orthonormal_columns(const Eigen::MatrixBase<Derived>& m,
                             typename Derived::Scalar tol) {
  using Scalar = typename Derived::Scalar;
  if (m.cols() == 0) return true;
  const Mat<Scalar> gram = m.transpose() * m;
  return (gram - Mat<Scalar>::Identity(m.cols(), m.cols()))
             .cwiseAbs()
             .maxCoeff() <= tol;
}

}  // namespace detail

/// Matrix with orthonormal columns spanning the directions a model
/// constrains (K, K^phi, K-tilde). A rank-0 basis is valid and carries zero
/// capacity everywhere.
template <typename Scalar>
class BasicCapacityBasis {
 public:
  explicit BasicCapacityBasis(Index ambient_dim = 0)
      : columns_(ambient_dim, 0) {}

  /// Throws InputError unless `columns` is finite with orthonormal columns
  /// (|K^T K - I| <= tol entrywise) and rank <= ambient dimension.
  static BasicCapacityBasis from_orthonormal(Mat<Scalar> columns,
                                             Scalar tol = Scalar(1e-10)) {
    detail::require_finite(columns, "capacity basis");
    if (columns.cols() > columns.rows()) {
      throw InputError("capacity basis: rank exceeds ambient dimension");
    }
    if (!detail::has_orthonormal_columns(columns, tol)) {
      throw InputError("capacity basis: columns are not orthonormal");
    }
    BasicCapacityBasis basis;
    basis.columns_ = std::move(columns);
    return basis;
  }

  const Mat<Scalar>& columns() const { return columns_; }
  Index ambient_dim() const { return columns_.rows(); }
  Index rank() const { return columns_.cols(); }

  /// Orthogonal projector onto the span, K K^T.
  Mat<Scalar> projector() const { return columns_ * columns_.transpose(); }

 private:
  Mat<Scalar> columns_;
};

/// Orthonormal frame S of a subspace of the input space; the capacity
/// allocated to it is ||K^T S||_F^2.
template <typename Scalar>
class BasicSubspaceSelector {
 public:
  static BasicSubspaceSelector from_orthonormal(Mat<Scalar> basis,
                                                Scalar tol = Scalar(1e-10)) {
    detail::require_finite(basis, "subspace selector");
    if (!detail::has_orthonormal_columns(basis, tol)) {
      throw InputError("subspace selector: S^T S is not the identity");
    }
    BasicSubspaceSelector s;
    s.basis_ = std::move(basis);
    return s;
  }

  /// Span of the canonical directions e_i, i in `indices`.
  static BasicSubspaceSelector coordinates(Index ambient_dim,
                                           std::span<const Index> indices) {
    Mat<Scalar> basis = Mat<Scalar>::Zero(ambient_dim, Index(indices.size()));
    for (Index k = 0; k < Index(indices.size()); ++k) {
      const Index i = indices[std::size_t(k)];
      if (i < 0 || i >= ambient_dim) {
        throw InputError("subspace selector: coordinate out of range");
      }
      basis(i, k) = Scalar(1);
    }
    return from_orthonormal(std::move(basis));
  }

  static BasicSubspaceSelector coordinate(Index ambient_dim, Index i) {
    const Index idx[] = {i};
    return coordinates(ambient_dim, idx);
  }

  static BasicSubspaceSelector full(Index ambient_dim) {
    BasicSubspaceSelector s;
    s.basis_ = Mat<Scalar>::Identity(ambient_dim, ambient_dim);
    return s;
  }

  const Mat<Scalar>& basis() const { return basis_; }
  Index ambient_dim() const { return basis_.rows(); }
  Index dim() const { return basis_.cols(); }

 private:
  Mat<Scalar> basis_;
};

/// Layer weights P = [p_1 ... p_m] (n_in x n_out) with unit-norm, pairwise
/// distinct columns.
template <typename Scalar>
class BasicProjectionMatrix {
 public:
  static BasicProjectionMatrix from_columns(Mat<Scalar> p,
                                            Scalar tol = Scalar(1e-12)) {
    detail::require_finite(p, "projection matrix");
    if (p.rows() == 0 || p.cols() == 0) {
      throw InputError("projection matrix: empty");
    }
    for (Index j = 0; j < p.cols(); ++j) {
      if (std::abs(p.col(j).norm() - Scalar(1)) > tol) {
        throw InputError("projection matrix: column " + std::to_string(j) +
                         " is not unit-norm");
      }
    }
    check_distinct(p);
    BasicProjectionMatrix out;
    out.p_ = std::move(p);
    return out;
  }

  /// Rescales every column to unit norm; zero columns are rejected.
  static BasicProjectionMatrix normalized(Mat<Scalar> p) {
    detail::require_finite(p, "projection matrix");
    for (Index j = 0; j < p.cols(); ++j) {
      const Scalar norm = p.col(j).norm();
      if (norm == Scalar(0)) {
        throw InputError("projection matrix: column " + std::to_string(j) +
                         " is zero");
      }
      p.col(j) /= norm;
    }
    return from_columns(std::move(p), Scalar(1e-12));
  }

  const Mat<Scalar>& matrix() const { return p_; }
  Index n_in() const { return p_.rows(); }
  Index n_out() const { return p_.cols(); }
  auto column(Index j) const { return p_.col(j); }

 private:
  static void check_distinct(const Mat<Scalar>& p) {
    for (Index a = 0; a < p.cols(); ++a) {
      for (Index b = a + 1; b < p.cols(); ++b) {
        if (p.col(a) == p.col(b)) {
          throw InputError("projection matrix: columns " + std::to_string(a) +
                           " and " + std::to_string(b) + " coincide");
        }
      }
    }
  }

  Mat<Scalar> p_;
};

/// Symmetric positive semi-definite covariance (Sigma or Sigma-tilde).
template <typename Scalar>
class BasicCovarianceMatrix {
 public:
  /// Rejects asymmetric inputs and eigenvalues below -tol * ||Sigma||.
  static BasicCovarianceMatrix from_matrix(Mat<Scalar> m,
                                           Scalar tol = Scalar(1e-10)) {
    detail::require_finite(m, "covariance");
    if (m.rows() != m.cols()) throw InputError("covariance: not square");
    const Scalar scale = std::max(m.norm(), Scalar(1));
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
      throw InputError("covariance: not symmetric");
    }
    if (m.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m,
                                                    Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -tol * m.norm()) {
        throw InputError("covariance: not positive semi-definite");
      }
    }
    BasicCovarianceMatrix c;
    c.m_ = std::move(m);
    return c;
  }

  static BasicCovarianceMatrix identity(Index dim, Scalar variance = 1) {
    BasicCovarianceMatrix c;
    c.m_ = variance * Mat<Scalar>::Identity(dim, dim);
    return c;
  }

  const Mat<Scalar>& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

 private:
  Mat<Scalar> m_;
};

/// Per-coordinate capacities kappa_i (dimensionless parameter-count mass).
template <typename Scalar>
class BasicSpatialCapacity {
 public:
  BasicSpatialCapacity() = default;

  explicit BasicSpatialCapacity(Vec<Scalar> values) : values_(std::move(values)) {
    detail::require_finite(values_, "spatial capacity");
    if (values_.size() > 0 && values_.minCoeff() < Scalar(-1e-10)) {
      throw InputError("spatial capacity: negative entry");
    }
  }

  static BasicSpatialCapacity dirac(Index n, Index at, Scalar mass = 1) {
    if (at < 0 || at >= n) throw InputError("dirac: index out of range");
    Vec<Scalar> v = Vec<Scalar>::Zero(n);
    v(at) = mass;
    return BasicSpatialCapacity(std::move(v));
  }

  static BasicSpatialCapacity uniform(Index n, Scalar total = 1) {
    return BasicSpatialCapacity(Vec<Scalar>::Constant(n, total / Scalar(n)));
  }

  const Vec<Scalar>& values() const { return values_; }
  Index size() const { return values_.size(); }
  Scalar operator[](Index i) const { return values_(i); }
  Scalar total() const { return values_.sum(); }

 private:
  Vec<Scalar> values_;
};

/// Jacobian dA/dW of a last-layer parametrization A = A(W), stored m x p
/// with entry (i, k) = dA_i / dW_k. Redundant parameters are allowed; the
/// Gram rank decides how many are independent.
template <typename Scalar>
class BasicParamMap {
 public:
  explicit BasicParamMap(Mat<Scalar> jacobian) : jacobian_(std::move(jacobian)) {
    detail::require_finite(jacobian_, "parameter map");
  }

  /// A = W on the coordinates `selected`, zero elsewhere.
  static BasicParamMap coordinate_selector(Index m,
                                           std::span<const Index> selected) {
    Mat<Scalar> j = Mat<Scalar>::Zero(m, Index(selected.size()));
    for (Index k = 0; k < Index(selected.size()); ++k) {
      const Index i = selected[std::size_t(k)];
      if (i < 0 || i >= m) throw InputError("parameter map: index out of range");
      j(i, k) = Scalar(1);
    }
    return BasicParamMap(std::move(j));
  }

  const Mat<Scalar>& jacobian() const { return jacobian_; }
  Index feature_dim() const { return jacobian_.rows(); }
  Index param_count() const { return jacobian_.cols(); }

 private:
  Mat<Scalar> jacobian_;
};

using CapacityBasis = BasicCapacityBasis<double>;
using SubspaceSelector = BasicSubspaceSelector<double>;
using ProjectionMatrix = BasicProjectionMatrix<double>;
using CovarianceMatrix = BasicCovarianceMatrix<double>;
using SpatialCapacity = BasicSpatialCapacity<double>;
using ParamMap = BasicParamMap<double>;

/// Orthonormal basis of the column space of `m`, dropping singular values
/// at or below tol * sigma_max. An all-zero input yields a rank-0 basis.
template <typename Derived>
BasicCapacityBasis<typename Derived::Scalar> orthonormal_basis(
    const Eigen::MatrixBase<Derived>& m,
    typename Derived::Scalar tol = typename Derived::Scalar(kDefaultRankTol)) {
  using Scalar = typename Derived::Scalar;
  if (!(tol > Scalar(0))) throw InputError("orthonormal_basis: tol must be > 0");
  const Mat<Scalar> dense = m;
  detail::require_finite(dense, "orthonormal_basis");
  if (dense.size() == 0 || dense.cwiseAbs().maxCoeff() == Scalar(0)) {
    return BasicCapacityBasis<Scalar>(dense.rows());
  }
  Eigen::JacobiSVD<Mat<Scalar>> svd(dense, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const Scalar cutoff = tol * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return BasicCapacityBasis<Scalar>::from_orthonormal(
      svd.matrixU().leftCols(rank), detail::factorization_tol<Scalar>());
}

/// K^phi: eigenvectors of the Gram matrix (dA/dW)(dA/dW)^T whose eigenvalues
/// exceed tol * lambda_max, ordered by decreasing eigenvalue.
template <typename Scalar>
BasicCapacityBasis<Scalar> gram_capacity_basis(
    const BasicParamMap<Scalar>& params, Scalar tol = Scalar(kDefaultRankTol)) {
  if (!(tol > Scalar(0))) throw InputError("gram_capacity_basis: tol must be > 0");
  const auto& j = params.jacobian();
  const Index m = j.rows();
  if (m == 0 || j.size() == 0) return BasicCapacityBasis<Scalar>(m);
  const Mat<Scalar> gram = j * j.transpose();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(gram);
  const auto& ev = es.eigenvalues();  // ascending
  const Scalar lambda_max = ev(m - 1);
  if (!(lambda_max > Scalar(0))) return BasicCapacityBasis<Scalar>(m);
  Index rank = 0;
  for (Index i = m - 1; i >= 0 && ev(i) > tol * lambda_max; --i) ++rank;
  Mat<Scalar> cols(m, rank);
  for (Index k = 0; k < rank; ++k) cols.col(k) = es.eigenvectors().col(m - 1 - k);
  return BasicCapacityBasis<Scalar>::from_orthonormal(std::move(cols),
                                                     detail::factorization_tol<Scalar>());
}

/// kappa(S) = ||K^T S||_F^2.
template <typename Scalar>
Scalar capacity_of_subspace(const BasicCapacityBasis<Scalar>& k,
                            const BasicSubspaceSelector<Scalar>& s) {
  if (k.ambient_dim() != s.ambient_dim()) {
    throw InputError("capacity_of_subspace: ambient dimensions differ (" +
                     std::to_string(k.ambient_dim()) + " vs " +
                     std::to_string(s.ambient_dim()) + ")");
  }
  return (k.columns().transpose() * s.basis()).squaredNorm();
}

/// Capacities along the canonical directions: row-wise squared norms of K.
template <typename Scalar>
BasicSpatialCapacity<Scalar> spatial_profile(const BasicCapacityBasis<Scalar>& k) {
  return BasicSpatialCapacity<Scalar>(k.columns().rowwise().squaredNorm());
}

/// Frobenius distance between the orthogonal projectors of two bases.
template <typename Scalar>
Scalar projector_distance(const BasicCapacityBasis<Scalar>& a,
                          const BasicCapacityBasis<Scalar>& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw InputError("projector_distance: ambient dimensions differ");
  }
  return (a.projector() - b.projector()).norm();
}

}  // namespace capnet
