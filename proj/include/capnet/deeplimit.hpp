#pragma once

// Deep residual limit: D_l = I + eps Delta with a local generator Delta, the
// Markov product over L layers, and the drift-diffusion PDE it approaches.
// Space is the neuron index (grid spacing 1); v and D are per unit depth.

#include <cstdint>
#include <vector>

#include "capnet/propagate.hpp"

namespace capnet {

enum class Boundary { periodic, reflecting };

std::string_view boundary_name(Boundary b);

/// Tridiagonal generator with Delta(i, i-1) = D + v/2, Delta(i, i) = -2D,
/// Delta(i, i+1) = D - v/2. Columns sum to zero.
struct ResidualGenerator {
  Index n = 0;
  double drift = 0.0;
  double diffusion = 0.0;
  Boundary boundary = Boundary::periodic;
  MatrixXd delta;
};

/// Rejects diffusion <= 0 and |v|/2 > D (negative transition weights).
ResidualGenerator residual_generator(Index n, double drift, double diffusion,
                                     Boundary boundary = Boundary::periodic);

struct DeepLimitConfig {
  double eps = 0.1;
  long layers = 10;  // L

  double depth_time() const { return eps * double(layers); }  // T = eps L
};

/// Largest eps keeping I + eps Delta entrywise non-negative.
double max_admissible_eps(const ResidualGenerator& gen);

/// I + eps Delta; NumericalError (quoting the admissible bound) if negative.
PropagationOperator residual_operator(const ResidualGenerator& gen, double eps);

/// result[l] = kappa^l, l = 0..L, with kappa^{l-1} = (I + eps Delta) kappa^l.
std::vector<SpatialCapacity> evolve_markov(const ResidualGenerator& gen,
                                           const DeepLimitConfig& cfg,
                                           const SpatialCapacity& kappa_top);

/// Sampled function pi(t, x) on an equally spaced 1-D grid.
struct PdeField {
  VectorXd values;
  double spacing = 1.0;
  double time = 0.0;

  double mass() const { return values.sum() * spacing; }
};

/// Heat-kernel convolution of `initial` with drift v and diffusion D at time
/// t (trapezoid rule). Periodic grids sum the kernel over periodic images.
PdeField gaussian_solution(const PdeField& initial, double drift,
                           double diffusion, double t, bool periodic = false);

/// Exact Kolmogorov-ODE solution exp(T Delta) kappa_top.
SpatialCapacity kolmogorov_solution(const ResidualGenerator& gen, double t,
                                    const SpatialCapacity& kappa_top);

struct Moments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Mass, mean position and variance of a non-negative profile (index units).
Moments profile_moments(const VectorXd& values);

/// Fraction of a Gaussian(mean x0, variance) lying inside [-0.5, n - 0.5].
double gaussian_mass_within(Index n, double x0, double variance);

struct MarkovPdeReport {
  double eps = 0.0;
  long layers = 0;
  double depth_time = 0.0;
  double sup_error = 0.0;       // max |Markov - Gaussian|
  double peak = 0.0;            // max of the Gaussian reference
  double relative_error = 0.0;  // sup_error / peak
  double markov_std = 0.0;
  double predicted_std = 0.0;   // sqrt(2 D T)
  bool boundary_flag = false;   // Gaussian mass inside the grid < 1 - 1e-6

  // Same T with eps / 2^k, L * 2^k on the same grid.
  std::vector<double> refined_eps;
  std::vector<double> refined_relative_error;  // vs Gaussian
  std::vector<double> ode_error;               // vs exp(T Delta); index 0 is the base run
  double ode_order = 0.0;                      // mean log2 ratio of ode_error

  // Grid spacing halved k times (D * 4^k, v * 2^k, eps / 4^k, L * 4^k).
  std::vector<double> grid_relative_error;
};

/// Sup-norm comparison of the Markov product against the Gaussian closed
/// form at T = eps L, with eps refinements (vs the Kolmogorov ODE) and grid
/// refinements (vs the Gaussian).
MarkovPdeReport compare_markov_pde(const ResidualGenerator& gen,
                                   const DeepLimitConfig& cfg,
                                   const SpatialCapacity& kappa_top,
                                   int refinements = 2);

/// L residual layers I + eps Delta_l with per-layer drift v_l drawn uniformly
/// from [-D/2, D/2]; deterministic per seed.
LayerChain random_layer_chain(Index n, double diffusion, double eps, long layers,
                              std::uint64_t seed,
                              Boundary boundary = Boundary::periodic);

}  // namespace capnet
