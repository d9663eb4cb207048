#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace capnet {

/// Shortest decimal string that round-trips to the same double.
inline std::string shortest_repr(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Fixed 17-significant-digit rendering used by the JSON reports. Integral
/// values keep a trailing ".0" so they stay visibly floating point.
inline std::string fixed17_repr(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace capnet
