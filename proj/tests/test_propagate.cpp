#include <doctest.h>

#include "capnet/propagate.hpp"
#include "helpers.hpp"

using namespace capnet;

namespace {

Layer operator_layer(MatrixXd d) {
  Layer l;
  l.weights = PropagationOperator::from_matrix(std::move(d));
  return l;
}

}  // namespace

TEST_CASE("propagation matrix is the column-renormalized square of P") {
  std::mt19937_64 rng(31);
  const MatrixXd raw = testing::gaussian_matrix(rng, 5, 4);
  const PropagationOperator d = propagation_matrix(raw);
  for (Index j = 0; j < 4; ++j) {
    CHECK(d.matrix().col(j).sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (Index i = 0; i < 5; ++i) {
      CHECK(d.matrix()(i, j) ==
            doctest::Approx(raw(i, j) * raw(i, j) / raw.col(j).squaredNorm()));
    }
  }
  const auto p = ProjectionMatrix::normalized(raw);
  CHECK((propagation_matrix(p).matrix() - d.matrix()).norm() < 1e-15);

  MatrixXd zero_col = raw;
  zero_col.col(2).setZero();
  CHECK_THROWS_AS(propagation_matrix(zero_col), InputError);
}

TEST_CASE("PropagationOperator validation") {
  MatrixXd neg(2, 2);
  neg << 1.1, 0.5, -0.1, 0.5;
  CHECK_THROWS_AS(PropagationOperator::from_matrix(neg), InputError);
  MatrixXd unnormalized(2, 2);
  unnormalized << 0.5, 0.5, 0.4, 0.5;
  CHECK_THROWS_AS(PropagationOperator::from_matrix(unnormalized), InputError);
  CHECK_NOTHROW(PropagationOperator::from_matrix(MatrixXd::Identity(3, 3)));
}

TEST_CASE("single-layer propagation conserves capacity") {
  std::mt19937_64 rng(32);
  const PropagationOperator d = propagation_matrix(testing::gaussian_matrix(rng, 6, 4));
  VectorXd kappa(4);
  kappa << 0.5, 1.0, 0.0, 2.0;
  const SpatialCapacity out = propagate_single(d, SpatialCapacity(kappa));
  CHECK(out.size() == 6);
  CHECK(out.total() == doctest::Approx(3.5).epsilon(1e-14));
  CHECK((out.values() - d.matrix() * kappa).norm() == 0.0);
  CHECK_THROWS_AS(propagate_single(d, SpatialCapacity::dirac(5, 0)), InputError);
}

TEST_CASE("chain propagation matches the dense operator product") {
  std::mt19937_64 rng(33);
  const std::vector<Index> dims = {7, 5, 6, 3, 4};
  LayerChain chain;
  MatrixXd product = MatrixXd::Identity(7, 7);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const MatrixXd d = testing::random_stochastic(rng, dims[l], dims[l + 1]);
    chain.layers.push_back(operator_layer(d));
    product = product * d;
  }
  VectorXd top(4);
  top << 0.1, 0.2, 0.3, 0.4;
  const auto profiles = propagate_chain(chain, SpatialCapacity(top));
  REQUIRE(profiles.size() == 5);
  CHECK((profiles.back().values() - top).norm() == 0.0);
  CHECK((profiles.front().values() - product * top).norm() < 1e-14);
  for (std::size_t l = 0; l < profiles.size(); ++l) {
    CHECK(profiles[l].size() == dims[l]);
  }
}

TEST_CASE("capacity is conserved over a thousand random layers") {
  std::mt19937_64 rng(34);
  LayerChain chain;
  for (int l = 0; l < 1000; ++l) chain.layers.push_back(operator_layer(testing::random_stochastic(rng, 6, 6)));
  const auto profiles = propagate_chain(chain, SpatialCapacity::uniform(6, 3.0));
  for (const auto& p : profiles) {
    CHECK(std::abs(p.total() - 3.0) <= 1e-9);
    CHECK(p.values().minCoeff() >= 0.0);
  }
}

TEST_CASE("chains built from raw weights") {
  std::mt19937_64 rng(35);
  LayerChain chain;
  Layer a;
  a.weights = MatrixXd(testing::gaussian_matrix(rng, 4, 3));
  Layer b;
  b.weights = MatrixXd(testing::gaussian_matrix(rng, 3, 2));
  chain.layers = {a, b};
  const auto profiles = propagate_chain(chain, SpatialCapacity::dirac(2, 1));
  CHECK(profiles.front().total() == doctest::Approx(1.0));

  chain.layers[1].activation = Activation::relu();
  try {
    propagate_chain(chain, SpatialCapacity::dirac(2, 1));
    FAIL("expected UnsupportedError");
  } catch (const UnsupportedError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }

  chain.layers[1].activation = Activation::pseudo_random();
  chain.layers[1].weights = MatrixXd(testing::gaussian_matrix(rng, 5, 2));
  try {
    propagate_chain(chain, SpatialCapacity::dirac(2, 1));
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
  }
}

TEST_CASE("differential propagation D = I + eps/(1+eps) (P o P - I)") {
  std::mt19937_64 rng(36);
  const auto p = ProjectionMatrix::normalized(testing::gaussian_matrix(rng, 5, 5));
  const MatrixXd pp = p.matrix().cwiseAbs2();
  for (double eps : {0.1, 0.5, 1.0}) {
    const PropagationOperator d = differential_propagation_matrix(p, eps);
    const MatrixXd expected =
        MatrixXd::Identity(5, 5) + eps / (1.0 + eps) * (pp - MatrixXd::Identity(5, 5));
    CHECK((d.matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((d.matrix().colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(d.matrix().minCoeff() >= 0.0);
  }
  CHECK_THROWS_AS(differential_propagation_matrix(p, -0.1), InputError);
  CHECK_THROWS_AS(differential_propagation_matrix(MatrixXd(testing::gaussian_matrix(rng, 3, 2)), 0.1),
                  InputError);

  // A differential layer in a chain uses the same operator.
  Layer l;
  l.weights = MatrixXd(p.matrix());
  l.flavor = LayerFlavor::differential;
  l.eps = 0.5;
  CHECK((layer_operator(l, "layer 1").matrix() -
         differential_propagation_matrix(p, 0.5).matrix()).norm() < 1e-15);
}
