#pragma once

// JSON network specs for the command-line tool, and the canonical report
// serialization (sorted keys, 17 significant digits) that makes repeated
// runs byte-identical.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "capnet/analyze.hpp"
#include "capnet/oracle.hpp"

namespace capnet {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed spec document; exit code 2.
class SpecError : public InputError {
 public:
  using InputError::InputError;
};

struct LayerSpec {
  std::string kind = "dense";  // dense | residual | differential
  Index n_in = 0;
  Index n_out = 0;
  std::string activation = "pseudo_random";
  // CSV path | random_gaussian:<seed> | uniform:<r> | residual:<eps>,<v>,<D>
  std::string weights;
  std::optional<double> eps;           // differential layers
  long repeat = 1;                     // consecutive copies of this layer
  std::string boundary = "periodic";   // residual weights only
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  // "dirac:<index>" | "uniform" | explicit vector
  std::variant<std::string, std::vector<double>> top_capacity = std::string("uniform");
};

NetworkSpec parse_network_spec(const json& doc);
NetworkSpec load_network_spec(const std::filesystem::path& path);
json to_json(const NetworkSpec& spec);

/// Instantiates every layer (after `repeat` expansion). Relative CSV paths
/// resolve against `base_dir`.
LayerChain build_chain(const NetworkSpec& spec, const std::filesystem::path& base_dir);
SpatialCapacity build_top_capacity(const NetworkSpec& spec, Index n_top);

/// Uniform receptive-field weights: column j holds 1/sqrt(r) on r
/// consecutive rows (cyclic) centred on j * n_in / n_out.
MatrixXd uniform_projection(Index n_in, Index n_out, long r);
MatrixXd random_gaussian_projection(Index n_in, Index n_out, std::uint64_t seed);
MatrixXd read_csv_matrix(const std::filesystem::path& path);

/// FNV-1a 64 of the canonical spec text, as 16 hex digits.
std::string spec_hash(const NetworkSpec& spec);

/// Canonical text: 2-space indent, sorted keys, doubles at 17 significant
/// digits, trailing newline.
std::string canonical_dump(const json& doc);

/// "layer,coordinate,kappa" rows, shortest round-trip floats, LF endings.
void write_profiles_csv(std::ostream& out, const std::vector<SpatialCapacity>& profiles);

json vector_json(const VectorXd& v);
json to_json(const DecouplingReport& r, const Activation& act);
json to_json(const MarkovPdeReport& r);
json to_json(const ErfReport& r);
json to_json(const ShatterReport& r);
json to_json(const EmpiricalReport& r);
json run_report(const NetworkSpec& spec, const std::vector<SpatialCapacity>& profiles);

}  // namespace capnet
