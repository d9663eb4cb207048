#pragma once

// Monte Carlo ground truth for the closed forms: empirical augmented
// covariances, least-squares optimal last layers, the stationarity
// condition K~^T X~ = 0, and empirical spatial capacities.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "capnet/augment.hpp"
#include "capnet/pseudo_random.hpp"
#include "capnet/sampling.hpp"

namespace capnet {

/// Draws one input vector Y of dimension n.
using InputSampler = std::function<VectorXd(Rng&, Index n)>;

struct ExperimentConfig {
  ProjectionMatrix p;
  Activation activation = Activation::pseudo_random();
  std::vector<Index> selector;  // trainable coordinates of A
  long n_samples = 100'000;
  std::uint64_t seed = 0;
  InputSampler sampler;     // empty: i.i.d. standard normal
  bool iid_inputs = true;   // the sampler yields Sigma = sigma^2 I
  int shards = kDefaultShards;

  Index n() const { return p.n_in(); }
  Index m() const { return p.n_out(); }
};

/// Target process c~^T Y~ + independent N(0, noise_std^2) noise. Any
/// c~ in R^{nm} is allowed; c~ = P~ A_0 makes the target realizable.
struct AugmentedTarget {
  VectorXd coeffs;
  double noise_std = 0.0;
};

/// Y~ = (eta_1 y, ..., eta_m y) with eta_j = eta((P^T y)_j).
VectorXd augmented_input(const ProjectionMatrix& p, const Activation& act,
                         const VectorXd& y);

/// phi(y) = f(P^T y).
VectorXd layer_features(const ProjectionMatrix& p, const Activation& act,
                        const VectorXd& y);

/// Sample average of Y~ Y~^T over N inputs, symmetrized.
CovarianceMatrix empirical_sigma_tilde(const ProjectionMatrix& p,
                                       const Activation& act,
                                       const InputSampler& sampler, long n_samples,
                                       std::uint64_t seed,
                                       int shards = kDefaultShards);

struct FitResult {
  VectorXd a_star;  // length m, zero off the selector
  double mse = 0.0;
  long n_samples = 0;
};

/// Least-squares A* over the config's samples, restricted to the selected
/// coordinates. A rank-deficient design raises NumericalError naming the
/// deficient feature columns.
FitResult fit_optimal_last_layer(const ExperimentConfig& config,
                                 const AugmentedTarget& target);
FitResult fit_optimal_last_layer(const ExperimentConfig& config,
                                 const std::function<double(const VectorXd&)>& target);

/// Mean squared error of coefficients `a` on the config's samples.
double empirical_loss(const ExperimentConfig& config, const AugmentedTarget& target,
                      const VectorXd& a);

struct StationarityReport {
  double residual = 0.0;            // ||K~^T X~|| on an independent sample
  double noise_floor = 0.0;         // jackknife standard error of that vector
  double in_sample_residual = 0.0;  // on the fitting sample: only the target-noise correlation
  VectorXd gradient;                // K~^T X~, one entry per selected coordinate
};

/// K~^T X~ with K~ = Sigma~ P~ S_sel and X~ = P~ A* - c~, evaluated with
/// the empirical Sigma~ of a fresh sample. The noise floor comes from
/// leave-one-shard-out resampling of fit and evaluation together, so it
/// assumes `a_star` is the least-squares fit on the config's own sample.
StationarityReport verify_stationarity(const ExperimentConfig& config,
                                       const AugmentedTarget& target,
                                       const VectorXd& a_star);

struct EmpiricalReport {
  SpatialCapacity kappa_hat;
  std::optional<SpatialCapacity> kappa_theory;
  std::optional<double> max_abs_dev;
  std::optional<double> stationarity_residual;
  std::optional<double> noise_floor;
  std::string caveat;
};

/// kappa-hat from the orthonormalized empirical Sigma~ P~ K^phi, compared
/// with D kappa^phi (pseudo-random) or the original-space profile (linear).
EmpiricalReport empirical_spatial_capacity(const ExperimentConfig& config);

/// empirical_spatial_capacity plus a fit/stationarity round on `target`.
EmpiricalReport run_verification(const ExperimentConfig& config,
                                 const AugmentedTarget& target);

}  // namespace capnet
