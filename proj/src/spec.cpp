#include "capnet/spec.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "capnet/numfmt.hpp"

namespace capnet {

namespace {

constexpr std::string_view kRandomGaussian = "random_gaussian:";
constexpr std::string_view kUniform = "uniform:";
constexpr std::string_view kResidual = "residual:";
constexpr std::string_view kDirac = "dirac:";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

template <typename T>
T parse_number(std::string_view text, const std::string& context) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw SpecError(context + ": cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string layer_name(std::size_t index) { return "layer " + std::to_string(index + 1); }

template <typename T>
T get_field(const json& obj, const char* key, const std::string& context) {
  if (!obj.contains(key)) throw SpecError(context + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw SpecError(context + ": field '" + key + "' has the wrong type");
  }
}

Boundary parse_boundary(const std::string& s, const std::string& context) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "reflecting") return Boundary::reflecting;
  throw SpecError(context + ": unknown boundary '" + s + "'");
}

void write_canonical(const json& j, std::string& out, int indent) {
  const std::string pad(std::size_t(indent + 2), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        write_canonical(it.value(), out, indent + 2);
      }
      out += "\n" + std::string(std::size_t(indent), ' ') + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_canonical(j[i], out, indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write_canonical(j[i], out, indent + 2);
      }
      out += "\n" + std::string(std::size_t(indent), ' ') + "]";
      return;
    }
    case json::value_t::number_float:
      out += fixed17_repr(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

NetworkSpec parse_network_spec(const json& doc) {
  if (!doc.is_object()) throw SpecError("spec: top level must be an object");
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw SpecError("spec: 'layers' must be a non-empty array");
  }
  NetworkSpec spec;
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const json& l = doc["layers"][i];
    const std::string ctx = layer_name(i);
    if (!l.is_object()) throw SpecError(ctx + ": must be an object");
    LayerSpec ls;
    ls.kind = get_field<std::string>(l, "kind", ctx);
    ls.n_in = get_field<Index>(l, "n_in", ctx);
    ls.n_out = get_field<Index>(l, "n_out", ctx);
    ls.weights = get_field<std::string>(l, "weights", ctx);
    if (l.contains("activation")) ls.activation = get_field<std::string>(l, "activation", ctx);
    if (l.contains("eps")) ls.eps = get_field<double>(l, "eps", ctx);
    if (l.contains("repeat")) ls.repeat = get_field<long>(l, "repeat", ctx);
    if (l.contains("boundary")) ls.boundary = get_field<std::string>(l, "boundary", ctx);

    if (ls.kind != "dense" && ls.kind != "residual" && ls.kind != "differential") {
      throw SpecError(ctx + ": unknown kind '" + ls.kind + "'");
    }
    if (ls.n_in < 1 || ls.n_out < 1) throw SpecError(ctx + ": dimensions must be positive");
    if (ls.repeat < 1) throw SpecError(ctx + ": repeat must be >= 1");
    if (ls.repeat > 1 && ls.n_in != ls.n_out) {
      throw SpecError(ctx + ": repeated layers must be square");
    }
    try {
      (void)parse_activation(ls.activation);
    } catch (const InputError& e) {
      throw SpecError(ctx + ": " + e.what());
    }
    parse_boundary(ls.boundary, ctx);
    if (ls.kind == "residual" && !starts_with(ls.weights, kResidual)) {
      throw SpecError(ctx + ": residual layers take 'residual:<eps>,<v>,<D>' weights");
    }
    if (ls.kind != "residual" && starts_with(ls.weights, kResidual)) {
      throw SpecError(ctx + ": 'residual:' weights require kind 'residual'");
    }
    if (ls.kind == "differential") {
      if (!ls.eps || !(*ls.eps > 0.0)) throw SpecError(ctx + ": differential layers need eps > 0");
      if (ls.n_in != ls.n_out) throw SpecError(ctx + ": differential layers must be square");
    }
    if (!spec.layers.empty() && spec.layers.back().n_out != ls.n_in) {
      throw SpecError(ctx + ": n_in " + std::to_string(ls.n_in) +
                      " does not match the previous layer's n_out " +
                      std::to_string(spec.layers.back().n_out));
    }
    spec.layers.push_back(std::move(ls));
  }

  if (doc.contains("top_capacity")) {
    const json& top = doc["top_capacity"];
    if (top.is_string()) {
      const auto s = top.get<std::string>();
      if (s != "uniform" && !starts_with(s, kDirac)) {
        throw SpecError("top_capacity: expected 'uniform', 'dirac:<index>' or a vector");
      }
      if (starts_with(s, kDirac)) {
        (void)parse_number<long>(std::string_view(s).substr(kDirac.size()), "top_capacity");
      }
      spec.top_capacity = s;
    } else if (top.is_array()) {
      std::vector<double> v;
      for (const auto& e : top) {
        if (!e.is_number()) throw SpecError("top_capacity: entries must be numbers");
        v.push_back(e.get<double>());
      }
      spec.top_capacity = std::move(v);
    } else {
      throw SpecError("top_capacity: expected a string or an array");
    }
  }
  return spec;
}

NetworkSpec load_network_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw SpecError("spec file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_network_spec(doc);
}

json to_json(const NetworkSpec& spec) {
  json doc;
  doc["layers"] = json::array();
  for (const auto& l : spec.layers) {
    json j = {{"kind", l.kind},           {"n_in", l.n_in},
              {"n_out", l.n_out},         {"activation", l.activation},
              {"weights", l.weights},     {"repeat", l.repeat},
              {"boundary", l.boundary}};
    if (l.eps) j["eps"] = *l.eps;
    doc["layers"].push_back(std::move(j));
  }
  std::visit([&](const auto& top) { doc["top_capacity"] = top; }, spec.top_capacity);
  return doc;
}

MatrixXd uniform_projection(Index n_in, Index n_out, long r) {
  if (r < 1 || r > n_in) throw SpecError("uniform weights: need 1 <= r <= n_in");
  MatrixXd p = MatrixXd::Zero(n_in, n_out);
  const double value = 1.0 / std::sqrt(double(r));
  for (Index j = 0; j < n_out; ++j) {
    const Index centre = j * n_in / n_out;
    for (long k = 0; k < r; ++k) {
      const Index row = ((centre + k - (r - 1) / 2) % n_in + n_in) % n_in;
      p(row, j) = value;
    }
  }
  return p;
}

MatrixXd random_gaussian_projection(Index n_in, Index n_out, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd p(n_in, n_out);
  for (Index j = 0; j < n_out; ++j) {
    for (Index i = 0; i < n_in; ++i) p(i, j) = normal(rng);
  }
  return ProjectionMatrix::normalized(std::move(p)).matrix();
}

MatrixXd read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open weights file '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    for (auto cell : split(line, ',')) {
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      row.push_back(parse_number<double>(cell, path.string() + ":" + std::to_string(line_no)));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw SpecError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SpecError("weights file '" + path.string() + "' is empty");
  MatrixXd m(Index(rows.size()), Index(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[std::size_t(i)][std::size_t(j)];
  }
  return m;
}

LayerChain build_chain(const NetworkSpec& spec, const std::filesystem::path& base_dir) {
  LayerChain chain;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    const std::string ctx = layer_name(i);
    const Activation act = parse_activation(ls.activation);
    const Boundary boundary = parse_boundary(ls.boundary, ctx);
    for (long copy = 0; copy < ls.repeat; ++copy) {
      Layer layer;
      layer.activation = act;
      layer.eps = ls.eps.value_or(0.0);
      const std::string_view w = ls.weights;
      if (starts_with(w, kResidual)) {
        const auto parts = split(w.substr(kResidual.size()), ',');
        if (parts.size() != 3) throw SpecError(ctx + ": expected 'residual:<eps>,<v>,<D>'");
        const double eps = parse_number<double>(parts[0], ctx);
        const double v = parse_number<double>(parts[1], ctx);
        const double d = parse_number<double>(parts[2], ctx);
        ResidualGenerator gen;
        try {
          gen = residual_generator(ls.n_in, v, d, boundary);
        } catch (const InputError& e) {
          throw SpecError(ctx + ": " + e.what());
        }
        try {
          layer.weights = residual_operator(gen, eps);
        } catch (const NumericalError& e) {
          throw NumericalError(ctx + ": " + e.what());
        }
        layer.flavor = LayerFlavor::residual;
        layer.eps = eps;
      } else {
        MatrixXd p;
        if (starts_with(w, kRandomGaussian)) {
          const auto seed = parse_number<std::uint64_t>(w.substr(kRandomGaussian.size()), ctx);
          p = random_gaussian_projection(ls.n_in, ls.n_out, seed + std::uint64_t(copy));
        } else if (starts_with(w, kUniform)) {
          p = uniform_projection(ls.n_in, ls.n_out, parse_number<long>(w.substr(kUniform.size()), ctx));
        } else {
          std::filesystem::path file(ls.weights);
          if (file.is_relative()) file = base_dir / file;
          p = read_csv_matrix(file);
        }
        if (p.rows() != ls.n_in || p.cols() != ls.n_out) {
          throw SpecError(ctx + ": weights are " + std::to_string(p.rows()) + "x" +
                          std::to_string(p.cols()) + ", expected " + std::to_string(ls.n_in) +
                          "x" + std::to_string(ls.n_out));
        }
        layer.weights = std::move(p);
        layer.flavor = ls.kind == "differential" ? LayerFlavor::differential : LayerFlavor::standard;
      }
      chain.layers.push_back(std::move(layer));
    }
  }
  return chain;
}

SpatialCapacity build_top_capacity(const NetworkSpec& spec, Index n_top) {
  if (const auto* v = std::get_if<std::vector<double>>(&spec.top_capacity)) {
    if (Index(v->size()) != n_top) {
      throw SpecError("top_capacity: expected " + std::to_string(n_top) + " entries");
    }
    try {
      return SpatialCapacity(Eigen::Map<const VectorXd>(v->data(), n_top));
    } catch (const InputError& e) {
      throw SpecError(std::string("top_capacity: ") + e.what());
    }
  }
  const auto& s = std::get<std::string>(spec.top_capacity);
  if (s == "uniform") return SpatialCapacity(VectorXd::Ones(n_top));
  const long at = parse_number<long>(std::string_view(s).substr(kDirac.size()), "top_capacity");
  if (at < 0 || at >= n_top) throw SpecError("top_capacity: dirac index out of range");
  return SpatialCapacity::dirac(n_top, at);
}

std::string spec_hash(const NetworkSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_dump(to_json(spec))) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_dump(const json& doc) {
  std::string out;
  write_canonical(doc, out, 0);
  out += "\n";
  return out;
}

void write_profiles_csv(std::ostream& out, const std::vector<SpatialCapacity>& profiles) {
  out << "layer,coordinate,kappa\n";
  for (std::size_t l = 0; l < profiles.size(); ++l) {
    for (Index i = 0; i < profiles[l].size(); ++i) {
      out << l << ',' << i << ',' << shortest_repr(profiles[l][i]) << '\n';
    }
  }
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const DecouplingReport& r, const Activation& act) {
  json j = {{"activation", to_string(act)},
            {"nu_hat", r.nu_hat},
            {"stderr", r.std_error},
            {"n_samples", r.n_samples},
            {"seed", r.seed}};
  if (r.nu) j["nu"] = *r.nu;
  if (!r.caveat.empty()) j["caveat"] = r.caveat;
  return j;
}

json to_json(const MarkovPdeReport& r) {
  json j = {{"eps", r.eps},
            {"L", r.layers},
            {"depth_time", r.depth_time},
            {"sup_error", r.sup_error},
            {"peak", r.peak},
            {"relative_error", r.relative_error},
            {"markov_std", r.markov_std},
            {"predicted_std", r.predicted_std},
            {"boundary_flag", r.boundary_flag},
            {"ode_order", r.ode_order}};
  j["refined_eps"] = r.refined_eps;
  j["refined_relative_error"] = r.refined_relative_error;
  j["ode_error"] = r.ode_error;
  j["grid_relative_error"] = r.grid_relative_error;
  return j;
}

json to_json(const ErfReport& r) {
  json depths = json::array();
  for (const auto& d : r.per_depth) {
    depths.push_back({{"layer", d.layer}, {"traversed", d.traversed}, {"std", d.width}});
  }
  return {{"probe", r.probe},
          {"per_depth", depths},
          {"exponent", r.exponent},
          {"fit_residual", r.fit_residual},
          {"fit_points", r.fit_points},
          {"boundary_flag", r.boundary_flag}};
}

json to_json(const ShatterReport& r) {
  json j = {{"max_path_weight", r.max_path_weight}, {"argmax", r.argmax}, {"L", r.layers}};
  if (r.continuum_estimate) j["continuum_estimate"] = *r.continuum_estimate;
  if (r.uniform_weight) j["uniform_weight"] = *r.uniform_weight;
  if (r.r) j["r"] = *r.r;
  if (r.eps) j["eps"] = *r.eps;
  return j;
}

json to_json(const EmpiricalReport& r) {
  json j = {{"kappa_hat", vector_json(r.kappa_hat.values())}, {"total", r.kappa_hat.total()}};
  if (r.kappa_theory) j["kappa_theory"] = vector_json(r.kappa_theory->values());
  if (r.max_abs_dev) j["max_abs_dev"] = *r.max_abs_dev;
  if (r.stationarity_residual) j["stationarity_residual"] = *r.stationarity_residual;
  if (r.noise_floor) j["noise_floor"] = *r.noise_floor;
  if (!r.caveat.empty()) j["caveat"] = r.caveat;
  return j;
}

json run_report(const NetworkSpec& spec, const std::vector<SpatialCapacity>& profiles) {
  json layers = json::array();
  json totals = json::array();
  for (std::size_t l = 0; l < profiles.size(); ++l) {
    layers.push_back({{"layer", l},
                      {"kappa", vector_json(profiles[l].values())},
                      {"total", profiles[l].total()}});
    totals.push_back(profiles[l].total());
  }
  json seeds = json::array();
  for (const auto& ls : spec.layers) {
    if (starts_with(ls.weights, kRandomGaussian)) {
      seeds.push_back(parse_number<std::uint64_t>(
          std::string_view(ls.weights).substr(kRandomGaussian.size()), "seed"));
    }
  }
  return {{"layers", layers},
          {"totals", totals},
          {"metadata", {{"spec_hash", spec_hash(spec)},
                        {"seeds", seeds},
                        {"tool_version", kToolVersion}}}};
}

}  // namespace capnet
