#pragma once

// Effective receptive field and path-weight (shattering) analyses of a
// capacity network.

#include <optional>
#include <vector>

#include "capnet/deeplimit.hpp"

namespace capnet {

struct DepthStd {
  long layer = 0;      // l
  long traversed = 0;  // L - l
  double width = 0.0;  // std of kappa^l as a probability mass
};

struct ErfReport {
  Index probe = 0;
  std::vector<DepthStd> per_depth;  // l = L down to 0
  double exponent = 0.0;            // slope of log std against log (L - l)
  double fit_residual = 0.0;        // RMS residual of that fit
  long fit_points = 0;
  bool boundary_flag = false;

  /// Width after `traversed` layers; NaN if that depth was not reached.
  double std_after(long traversed) const;
};

/// Propagates a Dirac at `probe` down the chain and fits the growth exponent
/// on depths whose width is at least two cells.
ErfReport erf_profile(const LayerChain& chain, Index probe);
ErfReport erf_profile(const ResidualGenerator& gen, const DeepLimitConfig& cfg,
                      Index probe);

struct ShatterReport {
  double max_path_weight = 0.0;
  Index argmax = 0;
  std::optional<double> continuum_estimate;  // residual chains only
  std::optional<double> uniform_weight;      // r^-L when r is known
  long layers = 0;
  std::optional<long> r;
  std::optional<double> eps;
};

/// max_i prod_l (D_l)_ii, plus exp(sum_l (D_l)_ii - 1) for residual chains.
ShatterReport max_path_weight(const LayerChain& chain);

/// Weight of every path through L uniform layers of receptive field r.
double uniform_path_weight(long r, long layers);

ShatterReport uniform_shatter_report(long r, long layers);

struct PathEnumeration {
  double total_weight = 0.0;
  double max_weight = 0.0;
  std::vector<Index> max_path;  // i_l, ..., i_L
  long path_count = 0;
};

inline constexpr long kMaxEnumeratedPaths = 1'000'000;

/// Brute-force sum over index paths i_l -> ... -> i_L of the products
/// (D_{l+1})_{i_l i_{l+1}} ... (D_L)_{i_{L-1} i_L}. Equal to the
/// (i_l, i_L) entry of D_{l+1} ... D_L. NumericalError past `max_paths`.
PathEnumeration enumerate_path_weights(const LayerChain& chain, Index i_bottom,
                                       Index i_top,
                                       long max_paths = kMaxEnumeratedPaths);

}  // namespace capnet
