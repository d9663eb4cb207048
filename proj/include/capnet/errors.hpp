#pragma once

#include <stdexcept>
#include <string>

namespace capnet {

// Malformed arguments: dimension mismatches, non-finite entries, bad specs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The request is well-formed but has no closed form here (e.g. a ReLU layer
// inside a closed-form chain, or a custom activation's covariance).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerically rejected: step too large for positivity, path-count guard, ...
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capnet
