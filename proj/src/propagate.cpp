#include "capnet/propagate.hpp"

#include <cmath>

namespace capnet {

namespace {

MatrixXd normalized_squares(const MatrixXd& p, const char* who) {
  detail::require_finite(p, who);
  if (p.size() == 0) throw InputError(std::string(who) + ": empty weights");
  MatrixXd sq = p.cwiseAbs2();
  for (Index j = 0; j < sq.cols(); ++j) {
    const double norm_sq = sq.col(j).sum();
    if (norm_sq == 0.0) {
      throw InputError(std::string(who) + ": column " + std::to_string(j) + " is zero");
    }
    sq.col(j) /= norm_sq;
  }
  return sq;
}

std::string layer_label(std::size_t index) {
  return "layer " + std::to_string(index + 1);
}

}  // namespace

PropagationOperator PropagationOperator::from_matrix(MatrixXd d, double tol) {
  detail::require_finite(d, "propagation operator");
  if (d.size() > 0 && d.minCoeff() < 0.0) {
    throw InputError("propagation operator: negative entry");
  }
  for (Index j = 0; j < d.cols(); ++j) {
    if (std::abs(d.col(j).sum() - 1.0) > tol) {
      throw InputError("propagation operator: column " + std::to_string(j) +
                       " does not sum to 1");
    }
  }
  PropagationOperator op;
  op.d_ = std::move(d);
  return op;
}

PropagationOperator propagation_matrix(const MatrixXd& p) {
  return PropagationOperator::from_matrix(normalized_squares(p, "propagation_matrix"));
}

PropagationOperator propagation_matrix(const ProjectionMatrix& p) {
  return propagation_matrix(p.matrix());
}

PropagationOperator differential_propagation_matrix(const MatrixXd& p, double eps) {
  if (p.rows() != p.cols()) {
    throw InputError("differential_propagation_matrix: P must be square");
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw InputError("differential_propagation_matrix: eps must be positive");
  }
  const MatrixXd d = normalized_squares(p, "differential_propagation_matrix");
  const MatrixXd id = MatrixXd::Identity(p.rows(), p.cols());
  return PropagationOperator::from_matrix(id + (eps / (1.0 + eps)) * (d - id));
}

PropagationOperator differential_propagation_matrix(const ProjectionMatrix& p,
                                                    double eps) {
  return differential_propagation_matrix(p.matrix(), eps);
}

SpatialCapacity propagate_single(const PropagationOperator& d,
                                 const SpatialCapacity& kappa_phi) {
  if (d.n_out() != kappa_phi.size()) {
    throw InputError("propagate_single: operator expects " +
                     std::to_string(d.n_out()) + " feature capacities, got " +
                     std::to_string(kappa_phi.size()));
  }
  return SpatialCapacity(d.matrix() * kappa_phi.values());
}

std::string_view flavor_name(LayerFlavor flavor) {
  switch (flavor) {
    case LayerFlavor::standard: return "standard";
    case LayerFlavor::residual: return "residual";
    case LayerFlavor::differential: return "differential";
  }
  return "unknown";
}

Index Layer::n_in() const {
  return std::visit([](const auto& w) -> Index {
    if constexpr (std::is_same_v<std::decay_t<decltype(w)>, MatrixXd>) {
      return w.rows();
    } else {
      return w.n_in();
    }
  }, weights);
}

Index Layer::n_out() const {
  return std::visit([](const auto& w) -> Index {
    if constexpr (std::is_same_v<std::decay_t<decltype(w)>, MatrixXd>) {
      return w.cols();
    } else {
      return w.n_out();
    }
  }, weights);
}

PropagationOperator layer_operator(const Layer& layer, const std::string& label) {
  if (layer.activation.kind != ActivationKind::pseudo_random) {
    throw UnsupportedError(label + ": activation '" + to_string(layer.activation) +
                           "' has no closed-form capacity propagation; only "
                           "pseudo_random layers can be chained");
  }
  try {
    if (const auto* op = std::get_if<PropagationOperator>(&layer.weights)) return *op;
    const auto& p = std::get<MatrixXd>(layer.weights);
    if (layer.flavor == LayerFlavor::differential) {
      return differential_propagation_matrix(p, layer.eps);
    }
    return propagation_matrix(p);
  } catch (const InputError& e) {
    throw InputError(label + ": " + e.what());
  }
}

std::vector<PropagationOperator> chain_operators(const LayerChain& chain) {
  std::vector<PropagationOperator> ops;
  ops.reserve(chain.size());
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const auto label = layer_label(l);
    if (l > 0 && chain.layers[l].n_in() != chain.layers[l - 1].n_out()) {
      throw InputError(label + ": input dimension " +
                       std::to_string(chain.layers[l].n_in()) +
                       " does not match the previous layer's output dimension " +
                       std::to_string(chain.layers[l - 1].n_out()));
    }
    ops.push_back(layer_operator(chain.layers[l], label));
  }
  return ops;
}

std::vector<SpatialCapacity> propagate_chain(const LayerChain& chain,
                                             const SpatialCapacity& kappa_top) {
  const auto ops = chain_operators(chain);
  if (!ops.empty() && ops.back().n_out() != kappa_top.size()) {
    throw InputError(layer_label(ops.size() - 1) + ": top capacity has " +
                     std::to_string(kappa_top.size()) + " entries, layer outputs " +
                     std::to_string(ops.back().n_out()));
  }
  std::vector<SpatialCapacity> profiles(ops.size() + 1);
  profiles.back() = kappa_top;
  for (std::size_t l = ops.size(); l > 0; --l) {
    profiles[l - 1] = propagate_single(ops[l - 1], profiles[l]);
  }
  return profiles;
}

}  // namespace capnet
