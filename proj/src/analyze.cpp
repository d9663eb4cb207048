#include "capnet/analyze.hpp"

#include <cmath>
#include <limits>

namespace capnet {

namespace {

ErfReport report_from_profiles(const std::vector<SpatialCapacity>& profiles,
                               Index probe) {
  ErfReport report;
  report.probe = probe;
  const long layers = long(profiles.size()) - 1;
  std::vector<double> xs;
  std::vector<double> ys;
  for (long l = layers; l >= 0; --l) {
    const Moments m = profile_moments(profiles[std::size_t(l)].values());
    const double width = std::sqrt(std::max(0.0, m.variance));
    report.per_depth.push_back(DepthStd{l, layers - l, width});
    if (layers - l > 0 && width >= 2.0) {
      xs.push_back(std::log(double(layers - l)));
      ys.push_back(std::log(width));
    }
  }
  report.fit_points = long(xs.size());
  if (xs.size() < 2) {
    report.exponent = std::numeric_limits<double>::quiet_NaN();
    report.fit_residual = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Index k = Index(xs.size());
    MatrixXd design(k, 2);
    VectorXd rhs(k);
    for (Index i = 0; i < k; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = xs[std::size_t(i)];
      rhs(i) = ys[std::size_t(i)];
    }
    const VectorXd coef = design.colPivHouseholderQr().solve(rhs);
    report.exponent = coef(1);
    report.fit_residual = std::sqrt((design * coef - rhs).squaredNorm() / double(k));
  }

  const VectorXd& bottom = profiles.front().values();
  const double total = bottom.sum();
  const Index n = bottom.size();
  const double edge = n > 1 ? bottom(0) + bottom(n - 1) : 0.0;
  report.boundary_flag = probe == 0 || probe == n - 1 || edge > 1e-6 * total;
  return report;
}

}  // namespace

double ErfReport::std_after(long traversed) const {
  for (const auto& d : per_depth) {
    if (d.traversed == traversed) return d.width;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

ErfReport erf_profile(const LayerChain& chain, Index probe) {
  if (chain.empty()) throw InputError("erf_profile: empty chain");
  const Index n_top = chain.layers.back().n_out();
  if (probe < 0 || probe >= n_top) throw InputError("erf_profile: probe out of range");
  const auto profiles = propagate_chain(chain, SpatialCapacity::dirac(n_top, probe));
  return report_from_profiles(profiles, probe);
}

ErfReport erf_profile(const ResidualGenerator& gen, const DeepLimitConfig& cfg,
                      Index probe) {
  if (probe < 0 || probe >= gen.n) throw InputError("erf_profile: probe out of range");
  const auto profiles = evolve_markov(gen, cfg, SpatialCapacity::dirac(gen.n, probe));
  ErfReport report = report_from_profiles(profiles, probe);
  const double depth = cfg.depth_time();
  if (gaussian_mass_within(gen.n, double(probe) + gen.drift * depth,
                           2.0 * gen.diffusion * depth) < 1.0 - 1e-6) {
    report.boundary_flag = true;
  }
  return report;
}

ShatterReport max_path_weight(const LayerChain& chain) {
  if (chain.empty()) throw InputError("max_path_weight: empty chain");
  const auto ops = chain_operators(chain);
  const Index n = ops.front().n_in();
  for (std::size_t l = 0; l < ops.size(); ++l) {
    if (ops[l].n_in() != ops[l].n_out() || ops[l].n_in() != n) {
      throw InputError("max_path_weight: layer " + std::to_string(l + 1) +
                       " is not square");
    }
  }

  ShatterReport report;
  report.layers = long(ops.size());
  report.max_path_weight = -1.0;
  for (Index i = 0; i < n; ++i) {
    double w = 1.0;
    for (const auto& op : ops) w *= op.matrix()(i, i);
    if (w > report.max_path_weight) {
      report.max_path_weight = w;
      report.argmax = i;
    }
  }

  bool residual = true;
  std::optional<double> eps;
  for (const auto& layer : chain.layers) {
    if (layer.flavor == LayerFlavor::standard) residual = false;
    if (layer.eps > 0.0) {
      if (eps && *eps != layer.eps) eps.reset();
      else if (!eps) eps = layer.eps;
    }
  }
  report.eps = eps;
  if (residual) {
    double exponent = 0.0;
    for (const auto& op : ops) exponent += op.matrix()(report.argmax, report.argmax) - 1.0;
    report.continuum_estimate = std::exp(exponent);
  }
  return report;
}

double uniform_path_weight(long r, long layers) {
  if (r < 1 || layers < 1) throw InputError("uniform_path_weight: r and L must be >= 1");
  // r^L is exact in double for every case that does not underflow anyway.
  return 1.0 / std::pow(double(r), double(layers));
}

ShatterReport uniform_shatter_report(long r, long layers) {
  ShatterReport report;
  report.layers = layers;
  report.r = r;
  report.uniform_weight = uniform_path_weight(r, layers);
  report.max_path_weight = *report.uniform_weight;
  return report;
}

PathEnumeration enumerate_path_weights(const LayerChain& chain, Index i_bottom,
                                       Index i_top, long max_paths) {
  if (chain.empty()) throw InputError("enumerate_path_weights: empty chain");
  const auto ops = chain_operators(chain);
  if (i_bottom < 0 || i_bottom >= ops.front().n_in()) {
    throw InputError("enumerate_path_weights: bottom index out of range");
  }
  if (i_top < 0 || i_top >= ops.back().n_out()) {
    throw InputError("enumerate_path_weights: top index out of range");
  }

  double count = 1.0;
  for (std::size_t l = 0; l + 1 < ops.size(); ++l) count *= double(ops[l].n_out());
  if (count > double(max_paths)) {
    throw NumericalError("enumerate_path_weights: " + std::to_string(long(count)) +
                         " paths exceed the guard of " + std::to_string(max_paths) +
                         "; use the matrix product instead");
  }

  PathEnumeration out;
  out.path_count = long(count);
  const std::size_t layers = ops.size();
  std::vector<Index> path(layers + 1, 0);
  path.front() = i_bottom;
  path.back() = i_top;

  // Odometer over the intermediate indices path[1..layers-1].
  while (true) {
    double w = 1.0;
    for (std::size_t l = 0; l < layers; ++l) w *= ops[l].matrix()(path[l], path[l + 1]);
    out.total_weight += w;
    if (w > out.max_weight || out.max_path.empty()) {
      out.max_weight = w;
      out.max_path = path;
    }
    std::size_t pos = layers - 1;
    while (pos >= 1) {
      if (++path[pos] < ops[pos - 1].n_out()) break;
      path[pos] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  return out;
}

}  // namespace capnet
