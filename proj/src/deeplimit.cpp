#include "capnet/deeplimit.hpp"

#include <Eigen/SparseCore>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace capnet {

namespace {

// Markov product through a sparse copy of I + eps Delta; used for the
// refinement runs where grids grow to several hundred cells.
VectorXd evolve_sparse(const ResidualGenerator& gen, double eps, long layers,
                       VectorXd kappa) {
  const MatrixXd step = residual_operator(gen, eps).matrix();
  const Eigen::SparseMatrix<double> a = step.sparseView();
  for (long l = 0; l < layers; ++l) kappa = a * kappa;
  return kappa;
}

double sup_norm(const VectorXd& a, const VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

std::string_view boundary_name(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "reflecting";
}

ResidualGenerator residual_generator(Index n, double drift, double diffusion,
                                     Boundary boundary) {
  if (n < 1) throw InputError("residual_generator: n must be positive");
  if (!(diffusion > 0.0) || !std::isfinite(diffusion)) {
    throw InputError("residual_generator: diffusion must be positive");
  }
  if (!std::isfinite(drift) || std::abs(drift) / 2.0 > diffusion) {
    throw InputError("residual_generator: |v|/2 must not exceed D (negative "
                     "transition weights)");
  }
  const double right = diffusion + drift / 2.0;  // mass moving i -> i+1
  const double left = diffusion - drift / 2.0;   // mass moving i -> i-1
  MatrixXd delta = MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    delta(j, j) -= 2.0 * diffusion;
    if (boundary == Boundary::periodic) {
      delta((j + 1) % n, j) += right;
      delta((j + n - 1) % n, j) += left;
    } else {
      delta(j + 1 < n ? j + 1 : j, j) += right;
      delta(j > 0 ? j - 1 : j, j) += left;
    }
  }
  return ResidualGenerator{n, drift, diffusion, boundary, std::move(delta)};
}

double max_admissible_eps(const ResidualGenerator& gen) {
  const double worst = -gen.delta.diagonal().minCoeff();
  return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

PropagationOperator residual_operator(const ResidualGenerator& gen, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InputError("residual operator: eps must be positive");
  }
  const double bound = max_admissible_eps(gen);
  if (eps > bound) {
    std::ostringstream msg;
    msg << "I + eps*Delta has negative entries for eps = " << eps
        << "; the maximal admissible eps is " << bound;
    throw NumericalError(msg.str());
  }
  MatrixXd step = MatrixXd::Identity(gen.n, gen.n) + eps * gen.delta;
  // Diagonal entries at the admissible bound can round to -1e-17.
  step = step.cwiseMax(0.0);
  return PropagationOperator::from_matrix(std::move(step), 1e-9);
}

std::vector<SpatialCapacity> evolve_markov(const ResidualGenerator& gen,
                                           const DeepLimitConfig& cfg,
                                           const SpatialCapacity& kappa_top) {
  if (cfg.layers < 1) throw InputError("evolve_markov: L must be positive");
  if (kappa_top.size() != gen.n) {
    throw InputError("evolve_markov: top capacity has the wrong length");
  }
  const PropagationOperator step = residual_operator(gen, cfg.eps);
  std::vector<SpatialCapacity> profiles(std::size_t(cfg.layers) + 1);
  profiles.back() = kappa_top;
  for (long l = cfg.layers; l > 0; --l) {
    profiles[std::size_t(l - 1)] = propagate_single(step, profiles[std::size_t(l)]);
  }
  return profiles;
}

PdeField gaussian_solution(const PdeField& initial, double drift,
                           double diffusion, double t, bool periodic) {
  if (!(t >= 0.0)) throw InputError("gaussian_solution: t must be non-negative");
  if (!(initial.spacing > 0.0)) throw InputError("gaussian_solution: spacing must be positive");
  if (t == 0.0) return initial;
  if (!(diffusion > 0.0)) throw InputError("gaussian_solution: diffusion must be positive");

  const Index n = initial.values.size();
  const double h = initial.spacing;
  const double four_dt = 4.0 * diffusion * t;
  const double norm = 1.0 / std::sqrt(std::numbers::pi * four_dt);
  const double shift = drift * t;
  const double width = n * h;
  long images = 0;
  if (periodic) {
    images = long(std::ceil((10.0 * std::sqrt(2.0 * diffusion * t) + std::abs(shift)) / width)) + 1;
  }

  VectorXd weights = VectorXd::Constant(n, h);
  if (!periodic && n > 1) {
    weights(0) = h / 2.0;
    weights(n - 1) = h / 2.0;
  }

  PdeField out{VectorXd::Zero(n), h, initial.time + t};
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Index k = 0; k < n; ++k) {
      const double source = weights(k) * initial.values(k);
      if (source == 0.0) continue;
      const double base = double(i - k) * h - shift;
      double kernel = 0.0;
      for (long img = -images; img <= images; ++img) {
        const double d = base + double(img) * width;
        kernel += std::exp(-d * d / four_dt);
      }
      acc += kernel * source;
    }
    out.values(i) = norm * acc;
  }
  return out;
}

SpatialCapacity kolmogorov_solution(const ResidualGenerator& gen, double t,
                                    const SpatialCapacity& kappa_top) {
  if (!(t >= 0.0)) throw InputError("kolmogorov_solution: t must be non-negative");
  const MatrixXd propagator = (t * gen.delta).exp();
  return SpatialCapacity((propagator * kappa_top.values()).cwiseMax(0.0));
}

Moments profile_moments(const VectorXd& values) {
  Moments m;
  m.mass = values.sum();
  if (m.mass <= 0.0) return m;
  const VectorXd x = VectorXd::LinSpaced(values.size(), 0.0, double(values.size() - 1));
  m.mean = values.dot(x) / m.mass;
  m.variance = values.dot((x.array() - m.mean).square().matrix()) / m.mass;
  return m;
}

double gaussian_mass_within(Index n, double x0, double variance) {
  if (variance <= 0.0) return (x0 >= -0.5 && x0 <= double(n) - 0.5) ? 1.0 : 0.0;
  const double s = std::sqrt(2.0 * variance);
  return 0.5 * (std::erf((double(n) - 0.5 - x0) / s) - std::erf((-0.5 - x0) / s));
}

MarkovPdeReport compare_markov_pde(const ResidualGenerator& gen,
                                   const DeepLimitConfig& cfg,
                                   const SpatialCapacity& kappa_top,
                                   int refinements) {
  const bool periodic = gen.boundary == Boundary::periodic;
  const double depth = cfg.depth_time();

  MarkovPdeReport report;
  report.eps = cfg.eps;
  report.layers = cfg.layers;
  report.depth_time = depth;

  const auto profiles = evolve_markov(gen, cfg, kappa_top);
  const VectorXd& markov = profiles.front().values();
  const VectorXd gauss =
      gaussian_solution(PdeField{kappa_top.values(), 1.0, 0.0}, gen.drift,
                        gen.diffusion, depth, periodic)
          .values;

  report.sup_error = sup_norm(markov, gauss);
  report.peak = gauss.maxCoeff();
  report.relative_error = report.peak > 0.0 ? report.sup_error / report.peak : 0.0;
  report.markov_std = std::sqrt(profile_moments(markov).variance);
  report.predicted_std = std::sqrt(2.0 * gen.diffusion * depth);

  const Moments top = profile_moments(kappa_top.values());
  report.boundary_flag =
      gaussian_mass_within(gen.n, top.mean + gen.drift * depth,
                           top.variance + 2.0 * gen.diffusion * depth) < 1.0 - 1e-6;

  const VectorXd ode = kolmogorov_solution(gen, depth, kappa_top).values();
  report.ode_error.push_back(sup_norm(markov, ode));
  double order_sum = 0.0;
  for (int k = 1; k <= refinements; ++k) {
    const double scale = std::ldexp(1.0, k);
    const double eps = cfg.eps / scale;
    const VectorXd fine =
        evolve_sparse(gen, eps, long(double(cfg.layers) * scale), kappa_top.values());
    report.refined_eps.push_back(eps);
    report.refined_relative_error.push_back(
        report.peak > 0.0 ? sup_norm(fine, gauss) / report.peak : 0.0);
    report.ode_error.push_back(sup_norm(fine, ode));
    const auto& e = report.ode_error;
    if (e[e.size() - 1] > 0.0 && e[e.size() - 2] > 0.0) {
      order_sum += std::log2(e[e.size() - 2] / e[e.size() - 1]);
    }
  }
  if (refinements > 0) report.ode_order = order_sum / refinements;

  for (int k = 1; k <= refinements; ++k) {
    const long s = 1L << k;
    const Index n_fine = gen.n * s;
    const auto fine_gen = residual_generator(n_fine, gen.drift * double(s),
                                             gen.diffusion * double(s * s), gen.boundary);
    VectorXd fine_top = VectorXd::Zero(n_fine);
    for (Index i = 0; i < gen.n; ++i) fine_top(i * s) = kappa_top[i];
    const VectorXd fine = evolve_sparse(fine_gen, cfg.eps / double(s * s),
                                        cfg.layers * s * s, fine_top);
    const VectorXd fine_gauss =
        gaussian_solution(PdeField{fine_top, 1.0, 0.0}, fine_gen.drift,
                          fine_gen.diffusion, depth, periodic)
            .values;
    const double peak = fine_gauss.maxCoeff();
    report.grid_relative_error.push_back(peak > 0.0 ? sup_norm(fine, fine_gauss) / peak : 0.0);
  }
  return report;
}

LayerChain random_layer_chain(Index n, double diffusion, double eps, long layers,
                              std::uint64_t seed, Boundary boundary) {
  if (layers < 1) throw InputError("random_layer_chain: L must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> drift(-diffusion / 2.0, diffusion / 2.0);
  LayerChain chain;
  chain.layers.reserve(std::size_t(layers));
  for (long l = 0; l < layers; ++l) {
    const auto gen = residual_generator(n, drift(rng), diffusion, boundary);
    Layer layer;
    layer.weights = residual_operator(gen, eps);
    layer.flavor = LayerFlavor::residual;
    layer.eps = eps;
    chain.layers.push_back(std::move(layer));
  }
  return chain;
}

}  // namespace capnet
