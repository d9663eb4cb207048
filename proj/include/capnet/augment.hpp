#pragma once

// Augmented input space of a layer phi(Y) = f(P^T Y). Writing f(z) = eta(z) z
// turns the model A^T f(P^T Y) into A^T P~^T Y~ with Y~ = (eta_j y_i), so the
// non-linearity moves into the covariance Sigma~ = E[Y~ Y~^T].

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "capnet/core.hpp"
#include "capnet/pseudo_random.hpp"

namespace capnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ActivationKind { linear, relu, leaky_relu, abs, pseudo_random, custom };

/// Pointwise activation f(z) = eta(z) z. Piecewise-linear kinds carry
/// eta = alpha on z <= 0 and beta on z > 0, rescaled so alpha^2 + beta^2 = 2.
struct Activation {
  ActivationKind kind = ActivationKind::linear;
  double leak = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;  // pseudo_random realization
  std::function<double(double)> custom_fn;

  static Activation linear();
  static Activation relu();
  // (alpha, beta) = (a, 1) * sqrt(2 / (1 + a^2)).
  static Activation leaky_relu(double slope);
  static Activation abs();
  static Activation pseudo_random(double sigma = 1.0, std::uint64_t seed = 0);
  static Activation custom(std::function<double(double)> fn);

  bool piecewise_linear() const;
  double eta(double z) const;
  double apply(double z) const { return eta(z) * z; }
};

/// Grammar: linear | relu | leaky_relu:<slope> | abs | pseudo_random[:<sigma>]
Activation parse_activation(std::string_view text);
std::string to_string(const Activation& act);
std::string_view kind_name(ActivationKind kind);

/// Row layout of an augmented space: `blocks` blocks of n rows each, the
/// first being the un-modified inputs when `identity_block` is set
/// (differential layers). Row r always refers to input coordinate r % n.
struct AugmentedLayout {
  Index n = 0;
  Index blocks = 0;
  bool identity_block = false;

  Index rows() const { return n * blocks; }
  Index input_of(Index row) const { return row % n; }
  // Feature index j whose eta multiplies this row; -1 for the identity block.
  Index feature_of(Index row) const {
    return identity_block ? row / n - 1 : row / n;
  }
};

struct AugmentedSpace {
  MatrixXd p_tilde;
  CovarianceMatrix sigma_tilde;
  AugmentedLayout layout;
};

struct DecouplingReport {
  std::optional<double> nu;  // closed form, when one exists
  double nu_hat = 0.0;
  double std_error = 0.0;  // serialized as "stderr"
  long n_samples = 0;
  std::uint64_t seed = 0;
  std::string caveat;
};

/// nm x m block-diagonal P~ with p_j in block row j of column j.
MatrixXd build_augmented_projection(const ProjectionMatrix& p);

/// n(n+1) x n: identity on top, sqrt(eps) blockdiag(p_1..p_n) below.
/// Columns have squared norm 1 + eps.
MatrixXd build_differential_projection(const ProjectionMatrix& p, double eps);

/// Closed-form Sigma~: diagonal blocks Sigma (sigma^2 Sigma for
/// pseudo-random), off-diagonal blocks nu Sigma.
CovarianceMatrix build_augmented_covariance(const CovarianceMatrix& sigma,
                                            const Activation& act, Index m);

/// nu = (alpha + beta)^2 / 4; 0 for pseudo-random.
double decoupling_nu(const Activation& act);

/// Sample mean of eta(z1) eta(z2) over independent z's (standard normal by
/// default), eta normalized to E[eta^2] = 1 for the closed-form kinds.
DecouplingReport estimate_nu_monte_carlo(
    const Activation& act, long n_samples, std::uint64_t seed,
    const std::function<double(Rng&)>& z_sampler = {},
    int shards = kDefaultShards);

/// (1/sqrt(m)) [K; K; ...; K].
CapacityBasis linear_stacked_basis(const CapacityBasis& k, Index m);

/// Block-diagonal S~ = blockdiag(S, ..., S) with m blocks.
SubspaceSelector augmented_selector(const SubspaceSelector& s, Index m);

/// K~ for a layer. With white input (Sigma~ = c I) and orthonormal P~ this is
/// P~ K^phi itself; otherwise the column space of Sigma~ P~ K^phi is
/// re-orthonormalized.
CapacityBasis augmented_capacity_basis(const CovarianceMatrix& sigma_tilde,
                                       const MatrixXd& p_tilde,
                                       const CapacityBasis& k_phi,
                                       bool white_input,
                                       double tol = kDefaultRankTol);

/// kappa_i = ||K~^T S~_i||_F^2, summing every augmented row that carries
/// input coordinate i.
SpatialCapacity augmented_profile(const CapacityBasis& k_tilde,
                                  const AugmentedLayout& layout);

AugmentedSpace make_augmented_space(const ProjectionMatrix& p,
                                    const CovarianceMatrix& sigma,
                                    const Activation& act);

}  // namespace capnet
