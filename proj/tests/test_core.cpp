#include <doctest.h>

#include <limits>
#include <numeric>

#include "capnet/core.hpp"
#include "helpers.hpp"

using namespace capnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::gaussian_matrix;
using testing::gram_schmidt;

TEST_CASE("orthonormal_basis spans the same subspace as Gram-Schmidt") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 6;
    const Index r = 1 + trial % 3;
    // Rank-r matrix with redundant columns.
    const MatrixXd a = gaussian_matrix(rng, n, r) * gaussian_matrix(rng, r, r + 2);
    const CapacityBasis k = orthonormal_basis(a);
    const MatrixXd q = gram_schmidt(a);
    CHECK(k.rank() == q.cols());
    CHECK((k.projector() - q * q.transpose()).norm() < 1e-10);
  }
}

TEST_CASE("rank-0 and non-finite inputs") {
  const CapacityBasis k = orthonormal_basis(MatrixXd::Zero(4, 3));
  CHECK(k.rank() == 0);
  CHECK(k.ambient_dim() == 4);
  CHECK(spatial_profile(k).total() == 0.0);

  MatrixXd bad = MatrixXd::Ones(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(orthonormal_basis(bad), InputError);
  CHECK_THROWS_AS(CapacityBasis::from_orthonormal(MatrixXd::Ones(3, 2)), InputError);
  CHECK_THROWS_AS(CapacityBasis::from_orthonormal(MatrixXd::Identity(2, 3)), InputError);
}

TEST_CASE("capacity of a subspace is bounded, additive and monotone") {
  std::mt19937_64 rng(12);
  const Index n = 7;
  const CapacityBasis k = orthonormal_basis(gaussian_matrix(rng, n, 4));
  const MatrixXd frame = testing::random_orthonormal(rng, n, n);

  const auto sub = [&](Index first, Index count) {
    return SubspaceSelector::from_orthonormal(frame.middleCols(first, count));
  };
  const double a = capacity_of_subspace(k, sub(0, 2));
  const double b = capacity_of_subspace(k, sub(2, 3));
  const double ab = capacity_of_subspace(k, sub(0, 5));
  CHECK(a >= 0.0);
  CHECK(a <= 2.0 + 1e-12);
  CHECK(ab == doctest::Approx(a + b).epsilon(1e-12));
  CHECK(ab >= a);
  CHECK(capacity_of_subspace(k, sub(0, n)) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(capacity_of_subspace(k, SubspaceSelector::full(n)) == doctest::Approx(4.0));
}

TEST_CASE("capacity does not depend on the choice of basis for the same span") {
  std::mt19937_64 rng(13);
  const Index n = 6;
  const CapacityBasis k = orthonormal_basis(gaussian_matrix(rng, n, 3));
  const MatrixXd rot = testing::random_orthonormal(rng, 3, 3);
  const CapacityBasis rotated = CapacityBasis::from_orthonormal(k.columns() * rot);
  const std::vector<Index> idx = {1, 4};
  const auto s = SubspaceSelector::coordinates(n, idx);
  CHECK(capacity_of_subspace(rotated, s) == doctest::Approx(capacity_of_subspace(k, s)));
  CHECK((spatial_profile(rotated).values() - spatial_profile(k).values()).norm() < 1e-12);
  CHECK(projector_distance(k, rotated) < 1e-12);
}

TEST_CASE("spatial profile sums to the rank and sits in [0, 1]") {
  std::mt19937_64 rng(14);
  for (Index r = 1; r <= 5; ++r) {
    const CapacityBasis k = orthonormal_basis(gaussian_matrix(rng, 8, r));
    const SpatialCapacity kappa = spatial_profile(k);
    CHECK(kappa.total() == doctest::Approx(double(r)).epsilon(1e-12));
    CHECK(kappa.values().minCoeff() >= 0.0);
    CHECK(kappa.values().maxCoeff() <= 1.0 + 1e-12);
    for (Index i = 0; i < 8; ++i) {
      CHECK(kappa[i] == doctest::Approx(capacity_of_subspace(k, SubspaceSelector::coordinate(8, i))));
    }
  }
}

TEST_CASE("Gram capacity basis counts independent parameters") {
  const std::vector<Index> sel = {0, 2, 5};
  const CapacityBasis k = gram_capacity_basis(ParamMap::coordinate_selector(6, sel));
  CHECK(k.rank() == 3);
  const SpatialCapacity kappa = spatial_profile(k);
  CHECK(kappa[0] == doctest::Approx(1.0));
  CHECK(kappa[1] == doctest::Approx(0.0));
  CHECK(kappa[5] == doctest::Approx(1.0));

  // A = (w1 + w2, w1 + w2, w3): three parameters, two independent directions.
  MatrixXd j(3, 3);
  j << 1, 1, 0,
       1, 1, 0,
       0, 0, 1;
  const CapacityBasis redundant = gram_capacity_basis(ParamMap(j));
  CHECK(redundant.rank() == 2);
  CHECK(spatial_profile(redundant).values()(0) == doctest::Approx(0.5));
  CHECK(gram_capacity_basis(ParamMap(MatrixXd::Zero(3, 2))).rank() == 0);
}

TEST_CASE("validated value types reject malformed input") {
  MatrixXd p(2, 2);
  p << 1, 0.6, 0, 0.8;
  CHECK_NOTHROW(ProjectionMatrix::from_columns(p));
  p(0, 0) = 0.9;
  CHECK_THROWS_AS(ProjectionMatrix::from_columns(p), InputError);
  MatrixXd dup(2, 2);
  dup << 1, 1, 0, 0;
  CHECK_THROWS_AS(ProjectionMatrix::from_columns(dup), InputError);
  CHECK_THROWS_AS(ProjectionMatrix::normalized(MatrixXd::Zero(2, 2)), InputError);
  CHECK(ProjectionMatrix::normalized(MatrixXd::Constant(3, 1, 2.0)).column(0).norm() ==
        doctest::Approx(1.0));

  MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(CovarianceMatrix::from_matrix(asym), InputError);
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(CovarianceMatrix::from_matrix(indefinite), InputError);

  VectorXd neg(2);
  neg << 1.0, -0.5;
  CHECK_THROWS_AS(SpatialCapacity{neg}, InputError);
  CHECK(SpatialCapacity::dirac(5, 2).total() == 1.0);
  CHECK(SpatialCapacity::uniform(4, 2.0)[3] == 0.5);
  CHECK_THROWS_AS(SpatialCapacity::dirac(5, 5), InputError);

  const std::vector<Index> out_of_range = {4};
  CHECK_THROWS_AS(SubspaceSelector::coordinates(4, out_of_range), InputError);
  const CapacityBasis k = orthonormal_basis(MatrixXd::Identity(3, 2));
  CHECK_THROWS_AS(capacity_of_subspace(k, SubspaceSelector::full(4)), InputError);
}

TEST_CASE("single precision instantiation") {
  Eigen::MatrixXf a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  const auto k = orthonormal_basis(a, 1e-5f);
  CHECK(k.rank() == 2);
  CHECK(spatial_profile(k).total() == doctest::Approx(2.0f).epsilon(1e-5));
}
