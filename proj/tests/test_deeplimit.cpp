#include <doctest.h>

#include <cmath>
#include <numbers>

#include "capnet/deeplimit.hpp"
#include "helpers.hpp"

using namespace capnet;

namespace {

// Repeated convolution with the three-point kernel on an unbounded line,
// starting from a unit mass at the origin.
VectorXd random_walk_oracle(double left, double stay, double right, long steps) {
  const Index half = steps + 1;
  VectorXd p = VectorXd::Zero(2 * half + 1);
  p(half) = 1.0;
  for (long s = 0; s < steps; ++s) {
    VectorXd next = VectorXd::Zero(p.size());
    for (Index i = 1; i + 1 < p.size(); ++i) {
      next(i - 1) += left * p(i);
      next(i) += stay * p(i);
      next(i + 1) += right * p(i);
    }
    p = next;
  }
  return p;
}

}  // namespace

TEST_CASE("generator structure") {
  for (Boundary b : {Boundary::periodic, Boundary::reflecting}) {
    const ResidualGenerator gen = residual_generator(9, 0.4, 1.0, b);
    CHECK(gen.delta.colwise().sum().cwiseAbs().maxCoeff() < 1e-15);
    CHECK(gen.delta(4, 3) == doctest::Approx(1.2));
    CHECK(gen.delta(4, 4) == doctest::Approx(-2.0));
    CHECK(gen.delta(4, 5) == doctest::Approx(0.8));
    for (Index i = 0; i < 9; ++i) {
      for (Index j = 0; j < 9; ++j) {
        if (i != j) CHECK(gen.delta(i, j) >= 0.0);
      }
    }
  }
  const ResidualGenerator periodic = residual_generator(5, 0.0, 1.0);
  CHECK(periodic.delta(4, 0) == 1.0);
  const ResidualGenerator reflecting = residual_generator(5, 0.0, 1.0, Boundary::reflecting);
  CHECK(reflecting.delta(4, 0) == 0.0);
  CHECK(reflecting.delta(0, 0) == -1.0);

  CHECK_THROWS_AS(residual_generator(5, 0.0, 0.0), InputError);
  CHECK_THROWS_AS(residual_generator(5, 2.5, 1.0), InputError);
  CHECK_THROWS_AS(residual_generator(0, 0.0, 1.0), InputError);
}

TEST_CASE("stability bound on eps") {
  const ResidualGenerator gen = residual_generator(11, 0.0, 1.0);
  CHECK(max_admissible_eps(gen) == 0.5);
  CHECK_NOTHROW(residual_operator(gen, 0.5));
  CHECK_THROWS_AS(residual_operator(gen, 0.51), NumericalError);
  CHECK_THROWS_AS(residual_operator(gen, 0.0), InputError);
  const PropagationOperator op = residual_operator(gen, 0.1);
  CHECK(op.matrix().colwise().sum().cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  CHECK(op.matrix()(5, 5) == doctest::Approx(0.8));
}

TEST_CASE("Markov profile matches an unbounded random walk away from the edges") {
  const ResidualGenerator gen = residual_generator(201, 0.3, 1.0);
  const DeepLimitConfig cfg{0.1, 60};
  const auto profiles = evolve_markov(gen, cfg, SpatialCapacity::dirac(201, 100));
  REQUIRE(profiles.size() == 61);
  const VectorXd walk = random_walk_oracle(0.1 * (1.0 - 0.15), 0.8, 0.1 * (1.0 + 0.15), 60);
  const VectorXd& markov = profiles.front().values();
  const Index half = (walk.size() - 1) / 2;
  double worst = 0.0;
  for (Index k = -half; k <= half; ++k) {
    worst = std::max(worst, std::abs(markov(100 + k) - walk(half + k)));
  }
  CHECK(worst < 1e-14);

  const Moments mo = profile_moments(markov);
  CHECK(mo.mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mo.mean == doctest::Approx(100.0 + 0.3 * 6.0).epsilon(1e-12));
  // Per step: variance 2 D eps - (eps v)^2.
  CHECK(mo.variance == doctest::Approx(60 * (0.2 - 0.03 * 0.03)).epsilon(1e-10));
}

TEST_CASE("Dirac probe spreads into the Gaussian kernel") {
  const ResidualGenerator gen = residual_generator(201, 0.0, 1.0);
  const DeepLimitConfig cfg{0.1, 100};
  const SpatialCapacity top = SpatialCapacity::dirac(201, 100);
  const MarkovPdeReport r = compare_markov_pde(gen, cfg, top, 2);
  CHECK(r.markov_std == doctest::Approx(std::sqrt(20.0)).epsilon(0.05));
  CHECK(r.predicted_std == doctest::Approx(std::sqrt(20.0)));
  CHECK(r.relative_error <= 0.02);
  CHECK_FALSE(r.boundary_flag);

  // Closed-form Gaussian evaluated independently.
  const VectorXd markov = evolve_markov(gen, cfg, top).front().values();
  double worst = 0.0;
  for (Index i = 0; i < 201; ++i) {
    const double x = double(i - 100);
    const double g = std::exp(-x * x / 40.0) / std::sqrt(40.0 * std::numbers::pi);
    worst = std::max(worst, std::abs(markov(i) - g));
  }
  CHECK(worst == doctest::Approx(r.sup_error).epsilon(1e-6));
}

TEST_CASE("Markov chain converges to the Kolmogorov flow at first order in eps") {
  const ResidualGenerator gen = residual_generator(61, 0.2, 1.0);
  const DeepLimitConfig cfg{0.1, 20};
  const SpatialCapacity top = SpatialCapacity::dirac(61, 30);
  const MarkovPdeReport r = compare_markov_pde(gen, cfg, top, 2);
  REQUIRE(r.ode_error.size() == 3);
  CHECK(r.ode_error[1] < r.ode_error[0]);
  CHECK(r.ode_error[2] < r.ode_error[1]);
  CHECK(r.ode_order >= 0.9);
  CHECK(r.ode_order <= 1.1);
  // Refining the grid together with eps approaches the Gaussian.
  REQUIRE(r.grid_relative_error.size() == 2);
  CHECK(r.grid_relative_error[1] < r.grid_relative_error[0]);

  const SpatialCapacity flow = kolmogorov_solution(gen, cfg.depth_time(), top);
  CHECK(flow.total() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Gaussian reference solution") {
  VectorXd init = VectorXd::Zero(101);
  init(50) = 1.0;
  const PdeField g = gaussian_solution(PdeField{init, 1.0, 0.0}, 0.5, 1.0, 4.0);
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-6));
  const Moments mo = profile_moments(g.values);
  CHECK(mo.mean == doctest::Approx(52.0).epsilon(1e-6));
  CHECK(mo.variance == doctest::Approx(8.0).epsilon(1e-4));

  // Periodic images keep the mass on a small ring.
  VectorXd ring = VectorXd::Zero(21);
  ring(3) = 1.0;
  const PdeField wrapped = gaussian_solution(PdeField{ring, 1.0, 0.0}, 0.0, 1.0, 30.0, true);
  CHECK(wrapped.mass() == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(gaussian_mass_within(201, 100.0, 20.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gaussian_mass_within(201, 2.0, 20.0) < 0.9);
}

TEST_CASE("boundary contact is flagged") {
  const ResidualGenerator gen = residual_generator(41, 0.0, 1.0, Boundary::reflecting);
  const MarkovPdeReport r =
      compare_markov_pde(gen, DeepLimitConfig{0.1, 100}, SpatialCapacity::dirac(41, 3), 0);
  CHECK(r.boundary_flag);
  const auto profiles =
      evolve_markov(gen, DeepLimitConfig{0.1, 100}, SpatialCapacity::dirac(41, 3));
  CHECK(profiles.front().total() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random residual chains are column-stochastic and conserve capacity") {
  const LayerChain chain = random_layer_chain(31, 1.0, 0.2, 200, 5);
  CHECK(chain.size() == 200);
  const auto ops = chain_operators(chain);
  for (const auto& op : ops) {
    CHECK((op.matrix().colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(op.matrix().minCoeff() >= 0.0);
  }
  const auto profiles = propagate_chain(chain, SpatialCapacity::uniform(31, 4.0));
  CHECK(std::abs(profiles.front().total() - 4.0) <= 1e-9);

  const LayerChain again = random_layer_chain(31, 1.0, 0.2, 200, 5);
  CHECK((chain_operators(again).back().matrix() - ops.back().matrix()).norm() == 0.0);
}
