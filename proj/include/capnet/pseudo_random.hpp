#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

#include "capnet/errors.hpp"
#include "capnet/sampling.hpp"

namespace capnet {

/// A fixed realization of an i.i.d. sign process z -> eta(z) in {-sigma, +sigma}.
/// The process is drawn once: equal inputs always give equal signs, while
/// inputs differing in a single bit are effectively independent.
struct PseudoRandomSign {
  std::uint64_t seed = 0;
  double sigma = 1.0;
};

/// eta(z) for the pseudo-random process. -0 and +0 map to the same sign.
inline double pseudo_random_eta(double z, const PseudoRandomSign& prs) {
  if (std::isnan(z)) throw InputError("pseudo_random_eta: NaN input");
  if (z == 0.0) z = 0.0;
  const auto bits = std::bit_cast<std::uint64_t>(z);
  const std::uint64_t h = splitmix64(bits ^ splitmix64(prs.seed));
  return (h >> 63) ? prs.sigma : -prs.sigma;
}

/// f(z) = eta(z) * z.
inline double pseudo_random_activation(double z, const PseudoRandomSign& prs) {
  return pseudo_random_eta(z, prs) * z;
}

}  // namespace capnet
