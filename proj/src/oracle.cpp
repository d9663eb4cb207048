#include "capnet/oracle.hpp"

#include <cmath>
#include <sstream>

namespace capnet {

namespace {

// Seed streams: fitting samples use shard indices directly, the independent
// stationarity sample is offset so the two never share a generator.
constexpr std::uint64_t kFreshStream = 1ULL << 20;

struct SampleSource {
  const InputSampler& sampler;
  Index n;
  std::uint64_t seed;
  std::uint64_t stream_base;
};

// Calls fn(y, rng) for every sample of shard `shard`; the rng is handed on
// so target noise is drawn from the same deterministic stream.
template <typename Fn>
void for_each_sample(const SampleSource& src, int shard, long count, Fn&& fn) {
  Rng rng(derive_seed(src.seed, src.stream_base + std::uint64_t(shard)));
  std::normal_distribution<double> normal;
  VectorXd y(src.n);
  for (long i = 0; i < count; ++i) {
    if (src.sampler) {
      y = src.sampler(rng, src.n);
      if (y.size() != src.n) throw InputError("input sampler returned a vector of the wrong size");
    } else {
      for (Index k = 0; k < src.n; ++k) y(k) = normal(rng);
    }
    fn(y, rng);
  }
}

SampleSource fit_source(const ExperimentConfig& c) {
  return SampleSource{c.sampler, c.n(), c.seed, 0};
}

void validate(const ExperimentConfig& c) {
  if (c.selector.empty()) throw InputError("experiment: selector is empty");
  if (c.n_samples < 1000) throw InputError("experiment: need at least 1000 samples");
  if (c.shards < 2) throw InputError("experiment: need at least two shards");
  for (std::size_t a = 0; a < c.selector.size(); ++a) {
    const Index j = c.selector[a];
    if (j < 0 || j >= c.m()) throw InputError("experiment: selector index out of range");
    for (std::size_t b = 0; b < a; ++b) {
      if (c.selector[b] == j) throw InputError("experiment: duplicate selector index");
    }
  }
}

double target_value(const AugmentedTarget& t, const ExperimentConfig& c,
                    const VectorXd& y, Rng& rng) {
  double v = t.coeffs.dot(augmented_input(c.p, c.activation, y));
  if (t.noise_std > 0.0) v += t.noise_std * std::normal_distribution<double>()(rng);
  return v;
}

struct Design {
  MatrixXd features;  // N x |selector|
  VectorXd targets;
};

template <typename TargetFn>
Design build_design(const ExperimentConfig& c, TargetFn&& target) {
  Design d{MatrixXd(c.n_samples, Index(c.selector.size())), VectorXd(c.n_samples)};
  const auto sizes = shard_sizes(c.n_samples, c.shards);
  Index row = 0;
  for (int s = 0; s < c.shards; ++s) {
    for_each_sample(fit_source(c), s, sizes[std::size_t(s)], [&](const VectorXd& y, Rng& rng) {
      const VectorXd phi = layer_features(c.p, c.activation, y);
      for (std::size_t k = 0; k < c.selector.size(); ++k) d.features(row, Index(k)) = phi(c.selector[k]);
      d.targets(row) = target(y, rng);
      ++row;
    });
  }
  return d;
}

FitResult solve_design(const ExperimentConfig& c, const Design& d) {
  const Index k = d.features.cols();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(d.features);
  if (qr.rank() < k) {
    std::ostringstream msg;
    msg << "fit_optimal_last_layer: design has rank " << qr.rank() << " < " << k
        << "; deficient feature columns:";
    for (Index i = qr.rank(); i < k; ++i) {
      msg << ' ' << c.selector[std::size_t(qr.colsPermutation().indices()(i))];
    }
    throw NumericalError(msg.str());
  }
  const VectorXd w = qr.solve(d.targets);
  FitResult out;
  out.a_star = VectorXd::Zero(c.m());
  for (Index i = 0; i < k; ++i) out.a_star(c.selector[std::size_t(i)]) = w(i);
  out.mse = (d.targets - d.features * w).squaredNorm() / double(d.targets.size());
  out.n_samples = c.n_samples;
  return out;
}

// Per-shard sums of J^T P~^T Y~ (Y~^T X~) = phi_sel(y) (Y~^T X~).
std::vector<VectorXd> shard_gradients(const ExperimentConfig& c, const VectorXd& x_tilde,
                                      std::uint64_t stream_base) {
  const auto sizes = shard_sizes(c.n_samples, c.shards);
  std::vector<VectorXd> sums;
  const SampleSource src{c.sampler, c.n(), c.seed, stream_base};
  for (int s = 0; s < c.shards; ++s) {
    VectorXd g = VectorXd::Zero(Index(c.selector.size()));
    for_each_sample(src, s, sizes[std::size_t(s)], [&](const VectorXd& y, Rng&) {
      const VectorXd y_tilde = augmented_input(c.p, c.activation, y);
      const VectorXd phi = layer_features(c.p, c.activation, y);
      const double r = y_tilde.dot(x_tilde);
      for (std::size_t k = 0; k < c.selector.size(); ++k) g(Index(k)) += phi(c.selector[k]) * r;
    });
    sums.push_back(std::move(g));
  }
  return sums;
}

struct Moment2 {
  MatrixXd augmented;  // sum of Y~ Y~^T
  MatrixXd input;      // sum of y y^T
};

Moment2 second_moments(const ProjectionMatrix& p, const Activation& act,
                       const SampleSource& src, long n_samples, int shards) {
  const Index n = p.n_in();
  const Index nm = n * p.n_out();
  Moment2 acc{MatrixXd::Zero(nm, nm), MatrixXd::Zero(n, n)};
  const auto sizes = shard_sizes(n_samples, shards);
  for (int s = 0; s < shards; ++s) {
    const long count = sizes[std::size_t(s)];
    MatrixXd batch(nm, count);
    MatrixXd inputs(n, count);
    long col = 0;
    for_each_sample(src, s, count, [&](const VectorXd& y, Rng&) {
      batch.col(col) = augmented_input(p, act, y);
      inputs.col(col) = y;
      ++col;
    });
    acc.augmented.noalias() += batch * batch.transpose();
    acc.input.noalias() += inputs * inputs.transpose();
  }
  return acc;
}

CovarianceMatrix to_covariance(const MatrixXd& sum, long n_samples) {
  MatrixXd avg = sum / double(n_samples);
  avg = 0.5 * (avg + avg.transpose()).eval();
  return CovarianceMatrix::from_matrix(std::move(avg), 1e-8);
}

}  // namespace

VectorXd augmented_input(const ProjectionMatrix& p, const Activation& act,
                         const VectorXd& y) {
  if (y.size() != p.n_in()) throw InputError("augmented_input: wrong input size");
  const Index n = p.n_in();
  const VectorXd z = p.matrix().transpose() * y;
  VectorXd out(n * p.n_out());
  for (Index j = 0; j < p.n_out(); ++j) out.segment(j * n, n) = act.eta(z(j)) * y;
  return out;
}

VectorXd layer_features(const ProjectionMatrix& p, const Activation& act,
                        const VectorXd& y) {
  if (y.size() != p.n_in()) throw InputError("layer_features: wrong input size");
  VectorXd z = p.matrix().transpose() * y;
  for (Index j = 0; j < z.size(); ++j) z(j) = act.eta(z(j)) * z(j);
  return z;
}

CovarianceMatrix empirical_sigma_tilde(const ProjectionMatrix& p, const Activation& act,
                                       const InputSampler& sampler, long n_samples,
                                       std::uint64_t seed, int shards) {
  if (n_samples < 1000) throw InputError("empirical_sigma_tilde: need at least 1000 samples");
  if (shards < 1) throw InputError("empirical_sigma_tilde: shard count must be positive");
  const SampleSource src{sampler, p.n_in(), seed, 0};
  return to_covariance(second_moments(p, act, src, n_samples, shards).augmented, n_samples);
}

FitResult fit_optimal_last_layer(const ExperimentConfig& config,
                                 const AugmentedTarget& target) {
  validate(config);
  if (target.coeffs.size() != config.n() * config.m()) {
    throw InputError("fit_optimal_last_layer: target coefficients must have length n*m");
  }
  return solve_design(config, build_design(config, [&](const VectorXd& y, Rng& rng) {
                        return target_value(target, config, y, rng);
                      }));
}

FitResult fit_optimal_last_layer(const ExperimentConfig& config,
                                 const std::function<double(const VectorXd&)>& target) {
  validate(config);
  return solve_design(config, build_design(config, [&](const VectorXd& y, Rng&) {
                        return target(y);
                      }));
}

double empirical_loss(const ExperimentConfig& config, const AugmentedTarget& target,
                      const VectorXd& a) {
  validate(config);
  if (a.size() != config.m()) throw InputError("empirical_loss: coefficients must have length m");
  const auto sizes = shard_sizes(config.n_samples, config.shards);
  double sum = 0.0;
  for (int s = 0; s < config.shards; ++s) {
    for_each_sample(fit_source(config), s, sizes[std::size_t(s)], [&](const VectorXd& y, Rng& rng) {
      const double t = target_value(target, config, y, rng);
      const double e = t - a.dot(layer_features(config.p, config.activation, y));
      sum += e * e;
    });
  }
  return sum / double(config.n_samples);
}

StationarityReport verify_stationarity(const ExperimentConfig& config,
                                       const AugmentedTarget& target,
                                       const VectorXd& a_star) {
  validate(config);
  if (a_star.size() != config.m()) throw InputError("verify_stationarity: A* must have length m");
  if (target.coeffs.size() != config.n() * config.m()) {
    throw InputError("verify_stationarity: target coefficients must have length n*m");
  }
  const MatrixXd p_tilde = build_augmented_projection(config.p);
  const VectorXd x_tilde = p_tilde * a_star - target.coeffs;
  const Index k = Index(config.selector.size());
  const Index nm = config.n() * config.m();
  const int shards = config.shards;
  const auto sizes = shard_sizes(config.n_samples, shards);
  const double n = double(config.n_samples);

  // Per-shard sufficient statistics: normal equations of the fit sample and
  // sum of phi_sel Y~^T over the fresh sample.
  std::vector<MatrixXd> gram(std::size_t(shards), MatrixXd::Zero(k, k));
  std::vector<VectorXd> rhs(std::size_t(shards), VectorXd::Zero(k));
  std::vector<MatrixXd> cross(std::size_t(shards), MatrixXd::Zero(k, nm));
  const SampleSource fresh{config.sampler, config.n(), config.seed, kFreshStream};
  VectorXd sel(k);
  const auto selected = [&](const VectorXd& phi) {
    for (Index i = 0; i < k; ++i) sel(i) = phi(config.selector[std::size_t(i)]);
  };
  for (int s = 0; s < shards; ++s) {
    const auto si = std::size_t(s);
    for_each_sample(fit_source(config), s, sizes[si], [&](const VectorXd& y, Rng& rng) {
      const double t = target_value(target, config, y, rng);
      selected(layer_features(config.p, config.activation, y));
      gram[si].noalias() += sel * sel.transpose();
      rhs[si] += t * sel;
    });
    for_each_sample(fresh, s, sizes[si], [&](const VectorXd& y, Rng&) {
      selected(layer_features(config.p, config.activation, y));
      cross[si].noalias() += sel * augmented_input(config.p, config.activation, y).transpose();
    });
  }
  MatrixXd gram_all = MatrixXd::Zero(k, k);
  VectorXd rhs_all = VectorXd::Zero(k);
  MatrixXd cross_all = MatrixXd::Zero(k, nm);
  for (std::size_t s = 0; s < std::size_t(shards); ++s) {
    gram_all += gram[s];
    rhs_all += rhs[s];
    cross_all += cross[s];
  }

  StationarityReport report;
  report.gradient = cross_all * x_tilde / n;
  report.residual = report.gradient.norm();

  // Delete-one-shard jackknife of the whole procedure: refit without fit
  // shard s, evaluate without fresh shard s. This covers the fluctuation of
  // A* as well as that of the fresh-sample average.
  std::vector<VectorXd> loo;
  VectorXd loo_mean = VectorXd::Zero(k);
  for (std::size_t s = 0; s < std::size_t(shards); ++s) {
    const VectorXd w = (gram_all - gram[s]).ldlt().solve(rhs_all - rhs[s]);
    VectorXd a = VectorXd::Zero(config.m());
    for (Index i = 0; i < k; ++i) a(config.selector[std::size_t(i)]) = w(i);
    const VectorXd x = p_tilde * a - target.coeffs;
    loo.push_back((cross_all - cross[s]) * x / (n - double(sizes[s])));
    loo_mean += loo.back();
  }
  loo_mean /= double(shards);
  double var = 0.0;
  for (const auto& est : loo) var += (est - loo_mean).squaredNorm();
  report.noise_floor = std::sqrt(double(shards - 1) / double(shards) * var);

  VectorXd in_sample = VectorXd::Zero(k);
  for (const auto& g : shard_gradients(config, x_tilde, 0)) in_sample += g;
  report.in_sample_residual = (in_sample / n).norm();
  return report;
}

EmpiricalReport empirical_spatial_capacity(const ExperimentConfig& config) {
  validate(config);
  const auto moments =
      second_moments(config.p, config.activation, fit_source(config), config.n_samples, config.shards);
  const CovarianceMatrix sigma_tilde = to_covariance(moments.augmented, config.n_samples);
  const MatrixXd p_tilde = build_augmented_projection(config.p);
  const CapacityBasis k_phi =
      gram_capacity_basis(ParamMap::coordinate_selector(config.m(), config.selector));
  const CapacityBasis k_tilde = augmented_capacity_basis(sigma_tilde, p_tilde, k_phi, false);

  EmpiricalReport report;
  report.kappa_hat = augmented_profile(k_tilde, AugmentedLayout{config.n(), config.m(), false});

  if (!config.iid_inputs) {
    report.caveat = "non-i.i.d. input sampler: no closed-form comparison";
    return report;
  }
  if (config.activation.kind == ActivationKind::pseudo_random) {
    VectorXd theory = VectorXd::Zero(config.n());
    const MatrixXd d = config.p.matrix().cwiseAbs2();
    for (Index j : config.selector) theory += d.col(j);
    report.kappa_theory = SpatialCapacity(std::move(theory));
  } else if (config.activation.kind == ActivationKind::linear) {
    const CovarianceMatrix sigma = to_covariance(moments.input, config.n_samples);
    const CapacityBasis k =
        orthonormal_basis(sigma.matrix() * config.p.matrix() * k_phi.columns());
    report.kappa_theory = spatial_profile(k);
  } else {
    report.caveat =
        "general-path result: orthonormalized Sigma~ P~ K^phi; no closed-form "
        "input-space capacity exists for this activation";
    return report;
  }
  report.max_abs_dev =
      (report.kappa_hat.values() - report.kappa_theory->values()).cwiseAbs().maxCoeff();
  return report;
}

EmpiricalReport run_verification(const ExperimentConfig& config,
                                 const AugmentedTarget& target) {
  EmpiricalReport report = empirical_spatial_capacity(config);
  const FitResult fit = fit_optimal_last_layer(config, target);
  const StationarityReport st = verify_stationarity(config, target, fit.a_star);
  report.stationarity_residual = st.residual;
  report.noise_floor = st.noise_floor;
  return report;
}

}  // namespace capnet
