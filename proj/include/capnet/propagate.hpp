#pragma once

// Backward capacity propagation kappa^{l-1} = D_l kappa^l through
// pseudo-random layers, with D_l = P_l o P_l column-stochastic.

#include <string>
#include <variant>
#include <vector>

#include "capnet/augment.hpp"
#include "capnet/core.hpp"

namespace capnet {

/// Column-stochastic n_in x n_out matrix mapping feature-space capacity to
/// input-space capacity.
class PropagationOperator {
 public:
  /// Rejects negative entries and columns whose sum differs from 1 by more
  /// than tol.
  static PropagationOperator from_matrix(MatrixXd d, double tol = 1e-10);

  const MatrixXd& matrix() const { return d_; }
  Index n_in() const { return d_.rows(); }
  Index n_out() const { return d_.cols(); }

 private:
  MatrixXd d_;
};

/// D_ij = p_ij^2 / sum_i p_ij^2. Raw weights are renormalized column-wise;
/// a zero column is an InputError.
PropagationOperator propagation_matrix(const MatrixXd& p);
PropagationOperator propagation_matrix(const ProjectionMatrix& p);

/// D = I + eps/(1+eps) (P o P - I) for the differential layer
/// Y + sqrt(eps) f(P^T Y). P must be square.
PropagationOperator differential_propagation_matrix(const MatrixXd& p, double eps);
PropagationOperator differential_propagation_matrix(const ProjectionMatrix& p,
                                                    double eps);

SpatialCapacity propagate_single(const PropagationOperator& d,
                                 const SpatialCapacity& kappa_phi);

enum class LayerFlavor { standard, residual, differential };

std::string_view flavor_name(LayerFlavor flavor);

struct Layer {
  // Raw projection weights P (n_in x n_out) or a ready-made operator.
  std::variant<MatrixXd, PropagationOperator> weights;
  Activation activation = Activation::pseudo_random();
  LayerFlavor flavor = LayerFlavor::standard;
  double eps = 0.0;  // differential layers only

  Index n_in() const;
  Index n_out() const;
};

/// phi_L o ... o phi_1; layers[0] touches the network input.
struct LayerChain {
  std::vector<Layer> layers;

  std::size_t size() const { return layers.size(); }
  bool empty() const { return layers.empty(); }
};

/// The propagation operator of one layer. Throws UnsupportedError for
/// activations other than pseudo-random, naming `label`.
PropagationOperator layer_operator(const Layer& layer, const std::string& label);

/// Top-down evaluation; result[l] = kappa^l for l = 0..L, result[L] = top.
std::vector<SpatialCapacity> propagate_chain(const LayerChain& chain,
                                             const SpatialCapacity& kappa_top);

/// Operators of every layer, in chain order.
std::vector<PropagationOperator> chain_operators(const LayerChain& chain);

}  // namespace capnet
