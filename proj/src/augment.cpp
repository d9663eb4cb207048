#include "capnet/augment.hpp"

#include <charconv>
#include <cmath>

#include "capnet/numfmt.hpp"

namespace capnet {

namespace {

double parse_real(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw InputError("activation: cannot parse " + std::string(what) + " '" +
                     std::string(text) + "'");
  }
  return value;
}

bool is_white(const MatrixXd& sigma_tilde) {
  if (sigma_tilde.rows() == 0) return false;
  const double c = sigma_tilde(0, 0);
  if (!(c > 0.0)) return false;
  const MatrixXd diff = sigma_tilde - c * MatrixXd::Identity(sigma_tilde.rows(), sigma_tilde.cols());
  return diff.cwiseAbs().maxCoeff() <= 1e-12 * c;
}

}  // namespace

Activation Activation::linear() { return {}; }

Activation Activation::relu() {
  Activation a;
  a.kind = ActivationKind::relu;
  a.alpha = 0.0;
  a.beta = std::sqrt(2.0);
  return a;
}

Activation Activation::leaky_relu(double slope) {
  if (!std::isfinite(slope)) throw InputError("leaky_relu: slope must be finite");
  Activation a;
  a.kind = ActivationKind::leaky_relu;
  a.leak = slope;
  const double scale = std::sqrt(2.0 / (1.0 + slope * slope));
  a.alpha = slope * scale;
  a.beta = scale;
  return a;
}

Activation Activation::abs() {
  Activation a;
  a.kind = ActivationKind::abs;
  a.alpha = -1.0;
  a.beta = 1.0;
  return a;
}

Activation Activation::pseudo_random(double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError("pseudo_random: sigma must be positive");
  }
  Activation a;
  a.kind = ActivationKind::pseudo_random;
  a.sigma = sigma;
  a.seed = seed;
  return a;
}

Activation Activation::custom(std::function<double(double)> fn) {
  if (!fn) throw InputError("custom activation: empty function");
  Activation a;
  a.kind = ActivationKind::custom;
  a.custom_fn = std::move(fn);
  return a;
}

bool Activation::piecewise_linear() const {
  return kind == ActivationKind::linear || kind == ActivationKind::relu ||
         kind == ActivationKind::leaky_relu || kind == ActivationKind::abs;
}

double Activation::eta(double z) const {
  switch (kind) {
    case ActivationKind::linear:
      return 1.0;
    case ActivationKind::relu:
    case ActivationKind::leaky_relu:
    case ActivationKind::abs:
      return z <= 0.0 ? alpha : beta;
    case ActivationKind::pseudo_random:
      return pseudo_random_eta(z, PseudoRandomSign{seed, sigma});
    case ActivationKind::custom:
      // eta = f(z)/z is undefined at 0; that point has measure zero.
      return z == 0.0 ? 0.0 : custom_fn(z) / z;
  }
  return 0.0;
}

std::string_view kind_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::linear: return "linear";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::abs: return "abs";
    case ActivationKind::pseudo_random: return "pseudo_random";
    case ActivationKind::custom: return "custom";
  }
  return "unknown";
}

Activation parse_activation(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  const bool has_arg = colon != std::string_view::npos;

  if (head == "leaky_relu") {
    if (!has_arg) throw InputError("activation: leaky_relu needs ':<slope>'");
    return Activation::leaky_relu(parse_real(arg, "slope"));
  }
  if (head == "pseudo_random") {
    return Activation::pseudo_random(has_arg ? parse_real(arg, "sigma") : 1.0);
  }
  if (has_arg) {
    throw InputError("activation: '" + std::string(head) + "' takes no argument");
  }
  if (head == "linear") return Activation::linear();
  if (head == "relu") return Activation::relu();
  if (head == "abs") return Activation::abs();
  throw InputError("activation: unknown kind '" + std::string(text) + "'");
}

std::string to_string(const Activation& act) {
  switch (act.kind) {
    case ActivationKind::leaky_relu:
      return "leaky_relu:" + shortest_repr(act.leak);
    case ActivationKind::pseudo_random:
      return act.sigma == 1.0 ? "pseudo_random"
                              : "pseudo_random:" + shortest_repr(act.sigma);
    default:
      return std::string(kind_name(act.kind));
  }
}

MatrixXd build_augmented_projection(const ProjectionMatrix& p) {
  const Index n = p.n_in();
  const Index m = p.n_out();
  MatrixXd out = MatrixXd::Zero(n * m, m);
  for (Index j = 0; j < m; ++j) out.block(j * n, j, n, 1) = p.column(j);
  return out;
}

MatrixXd build_differential_projection(const ProjectionMatrix& p, double eps) {
  if (p.n_in() != p.n_out()) {
    throw InputError("differential projection: P must be square");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InputError("differential projection: eps must be positive");
  }
  const Index n = p.n_in();
  MatrixXd out = MatrixXd::Zero(n * (n + 1), n);
  out.topRows(n).setIdentity();
  const double scale = std::sqrt(eps);
  for (Index j = 0; j < n; ++j) out.block((j + 1) * n, j, n, 1) = scale * p.column(j);
  return out;
}

double decoupling_nu(const Activation& act) {
  switch (act.kind) {
    case ActivationKind::pseudo_random:
      return 0.0;
    case ActivationKind::custom:
      throw UnsupportedError(
          "decoupling_nu: no closed form for custom activations; use the "
          "Monte Carlo estimate");
    case ActivationKind::relu:
    case ActivationKind::leaky_relu: {
      // Same value as the (alpha, beta) form, without the rounding of sqrt(2)^2.
      const double a = act.kind == ActivationKind::relu ? 0.0 : act.leak;
      return (1.0 + a) * (1.0 + a) / (2.0 * (1.0 + a * a));
    }
    default:
      return 0.25 * (act.alpha + act.beta) * (act.alpha + act.beta);
  }
}

CovarianceMatrix build_augmented_covariance(const CovarianceMatrix& sigma,
                                            const Activation& act, Index m) {
  if (m <= 0) throw InputError("augmented covariance: m must be positive");
  if (act.kind == ActivationKind::custom) {
    throw UnsupportedError(
        "augmented covariance: custom activations have no closed form; "
        "estimate Sigma~ empirically");
  }
  const Index n = sigma.dim();
  const double diag_scale =
      act.kind == ActivationKind::pseudo_random ? act.sigma * act.sigma : 1.0;
  const double off_scale = decoupling_nu(act);
  MatrixXd out(n * m, n * m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      out.block(a * n, b * n, n, n) =
          (a == b ? diag_scale : off_scale) * sigma.matrix();
    }
  }
  return CovarianceMatrix::from_matrix(std::move(out));
}

DecouplingReport estimate_nu_monte_carlo(const Activation& act, long n_samples,
                                         std::uint64_t seed,
                                         const std::function<double(Rng&)>& z_sampler,
                                         int shards) {
  if (n_samples < 1000) throw InputError("estimate_nu: need at least 1000 samples");
  if (shards < 1) throw InputError("estimate_nu: shard count must be positive");

  DecouplingReport report;
  report.n_samples = n_samples;
  report.seed = seed;
  double norm = 1.0;
  if (act.kind == ActivationKind::pseudo_random) {
    norm = 1.0 / (act.sigma * act.sigma);
  } else if (act.kind == ActivationKind::custom) {
    report.caveat =
        "custom activation: eta is not normalized and the framework's "
        "closed forms do not apply";
  }
  if (act.kind != ActivationKind::custom) report.nu = decoupling_nu(act);

  const auto sizes = shard_sizes(n_samples, shards);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int s = 0; s < shards; ++s) {
    Rng rng(derive_seed(seed, std::uint64_t(s)));
    std::normal_distribution<double> normal;
    double shard_sum = 0.0;
    double shard_sq = 0.0;
    for (long i = 0; i < sizes[std::size_t(s)]; ++i) {
      const double z1 = z_sampler ? z_sampler(rng) : normal(rng);
      const double z2 = z_sampler ? z_sampler(rng) : normal(rng);
      const double x = norm * act.eta(z1) * act.eta(z2);
      shard_sum += x;
      shard_sq += x * x;
    }
    sum += shard_sum;
    sum_sq += shard_sq;
  }
  const double n = double(n_samples);
  report.nu_hat = sum / n;
  const double var = std::max(0.0, (sum_sq - n * report.nu_hat * report.nu_hat) / (n - 1.0));
  report.std_error = std::sqrt(var / n);
  return report;
}

CapacityBasis linear_stacked_basis(const CapacityBasis& k, Index m) {
  if (m <= 0) throw InputError("linear_stacked_basis: m must be positive");
  const Index n = k.ambient_dim();
  MatrixXd out(n * m, k.rank());
  const double scale = 1.0 / std::sqrt(double(m));
  for (Index j = 0; j < m; ++j) out.middleRows(j * n, n) = scale * k.columns();
  return CapacityBasis::from_orthonormal(std::move(out));
}

SubspaceSelector augmented_selector(const SubspaceSelector& s, Index m) {
  if (m <= 0) throw InputError("augmented_selector: m must be positive");
  const Index n = s.ambient_dim();
  const Index k = s.dim();
  MatrixXd out = MatrixXd::Zero(n * m, k * m);
  for (Index j = 0; j < m; ++j) out.block(j * n, j * k, n, k) = s.basis();
  return SubspaceSelector::from_orthonormal(std::move(out));
}

CapacityBasis augmented_capacity_basis(const CovarianceMatrix& sigma_tilde,
                                       const MatrixXd& p_tilde,
                                       const CapacityBasis& k_phi,
                                       bool white_input, double tol) {
  if (sigma_tilde.dim() != p_tilde.rows()) {
    throw InputError("augmented_capacity_basis: Sigma~ is " +
                     std::to_string(sigma_tilde.dim()) + "-dimensional but P~ has " +
                     std::to_string(p_tilde.rows()) + " rows");
  }
  if (p_tilde.cols() != k_phi.ambient_dim()) {
    throw InputError("augmented_capacity_basis: P~ has " +
                     std::to_string(p_tilde.cols()) + " columns but K^phi lives in " +
                     std::to_string(k_phi.ambient_dim()) + " dimensions");
  }
  if (white_input && is_white(sigma_tilde.matrix())) {
    const MatrixXd direct = p_tilde * k_phi.columns();
    if (detail::has_orthonormal_columns(direct, 1e-10)) {
      return CapacityBasis::from_orthonormal(direct, 1e-10);
    }
  }
  return orthonormal_basis(sigma_tilde.matrix() * p_tilde * k_phi.columns(), tol);
}

SpatialCapacity augmented_profile(const CapacityBasis& k_tilde,
                                  const AugmentedLayout& layout) {
  if (k_tilde.ambient_dim() != layout.rows()) {
    throw InputError("augmented_profile: basis does not match the layout");
  }
  VectorXd kappa = VectorXd::Zero(layout.n);
  const VectorXd row_mass = k_tilde.columns().rowwise().squaredNorm();
  for (Index r = 0; r < layout.rows(); ++r) kappa(layout.input_of(r)) += row_mass(r);
  return SpatialCapacity(std::move(kappa));
}

AugmentedSpace make_augmented_space(const ProjectionMatrix& p,
                                    const CovarianceMatrix& sigma,
                                    const Activation& act) {
  if (sigma.dim() != p.n_in()) {
    throw InputError("make_augmented_space: Sigma and P disagree on n");
  }
  return AugmentedSpace{build_augmented_projection(p),
                        build_augmented_covariance(sigma, act, p.n_out()),
                        AugmentedLayout{p.n_in(), p.n_out(), false}};
}

}  // namespace capnet
