// capnet: command-line front end for the capacity library.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "capnet/numfmt.hpp"
#include "capnet/spec.hpp"

namespace {

using namespace capnet;

struct Output {
  std::string out;
  std::string csv;
};

void emit(const json& doc, const Output& o) {
  const std::string text = canonical_dump(doc);
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw InputError("cannot write '" + o.out + "'");
  f << text;
  spdlog::info("wrote {}", o.out);
}

void emit_csv(const std::string& path, const std::string& text) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  spdlog::info("wrote {}", path);
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("capnet");
  logger->set_pattern("capnet: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CAPNET_LOG")) {
    const std::map<std::string, spdlog::level::level_enum> levels = {
        {"error", spdlog::level::err},
        {"warn", spdlog::level::warn},
        {"info", spdlog::level::info},
        {"debug", spdlog::level::debug}};
    if (const auto it = levels.find(env); it != levels.end()) {
      spdlog::set_level(it->second);
    } else {
      spdlog::warn("ignoring unknown CAPNET_LOG value '{}'", env);
    }
  }
}

Boundary boundary_from(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "reflecting") return Boundary::reflecting;
  throw InputError("unknown boundary '" + s + "'");
}

std::filesystem::path spec_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path();
}

// key=value positionals of the shatter command.
std::map<std::string, std::string> key_values(const std::vector<std::string>& args,
                                              std::string* spec_file) {
  std::map<std::string, std::string> kv;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      if (!spec_file->empty()) throw InputError("unexpected argument '" + a + "'");
      *spec_file = a;
      continue;
    }
    kv[a.substr(0, eq)] = a.substr(eq + 1);
  }
  return kv;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + key + "='" + it->second + "'");
  }
}

long kv_long(const std::map<std::string, std::string>& kv, const std::string& key,
             long fallback) {
  const double v = kv_double(kv, key, double(fallback));
  if (v != double(long(v))) throw InputError(key + " must be an integer");
  return long(v);
}

struct DeepParams {
  long n = 201;
  double eps = 0.1;
  double diffusion = 1.0;
  double drift = 0.0;
  long layers = 100;
  long probe = -1;  // centre
  std::string boundary = "periodic";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--n", n, "grid size")->check(CLI::PositiveNumber);
    cmd->add_option("--eps", eps, "step size per layer");
    cmd->add_option("--D", diffusion, "diffusion coefficient");
    cmd->add_option("--v", drift, "drift");
    cmd->add_option("--L", layers, "number of layers")->check(CLI::PositiveNumber);
    cmd->add_option("--probe", probe, "output coordinate of the Dirac (default: centre)");
    cmd->add_option("--boundary", boundary, "periodic | reflecting");
  }
  ResidualGenerator generator() const {
    return residual_generator(n, drift, diffusion, boundary_from(boundary));
  }
  Index probe_index() const { return probe < 0 ? n / 2 : probe; }
  json params() const {
    return {{"n", n}, {"eps", eps}, {"D", diffusion}, {"v", drift},
            {"L", layers}, {"probe", probe_index()}, {"boundary", boundary}};
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Capacity allocation analysis for neural-network layers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  Output o;
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", o.out, "write the JSON report to this path");
  };

  // nu
  std::string act_text;
  std::optional<long> mc;
  std::uint64_t seed = 0;
  auto* nu = app.add_subcommand("nu", "decoupling scale of an activation");
  nu->add_option("activation", act_text,
                 "linear | relu | leaky_relu:<slope> | abs | pseudo_random[:<sigma>]")
      ->required();
  nu->add_option("--mc", mc, "Monte Carlo sample count");
  nu->add_option("--seed", seed, "seed");
  add_out(nu);

  // layer
  std::string spec_path;
  long layer_index = -1;
  auto* layer = app.add_subcommand("layer", "propagation operator of one layer of a spec");
  layer->add_option("spec", spec_path, "network spec (JSON)")->required();
  layer->add_option("--index", layer_index, "1-based layer index after repeat expansion "
                                            "(default: the top layer)");
  add_out(layer);

  // chain / propagate
  auto* chain = app.add_subcommand("chain", "propagate capacity through a whole spec");
  chain->alias("propagate");
  chain->add_option("spec", spec_path, "network spec (JSON)")->required();
  chain->add_option("--csv", o.csv, "write per-layer profiles as CSV");
  add_out(chain);

  // pde
  DeepParams deep;
  int refinements = 2;
  auto* pde = app.add_subcommand("pde", "Markov chain versus its diffusion limit");
  deep.add_to(pde);
  pde->add_option("--refinements", refinements, "eps halvings for the convergence study")
      ->check(CLI::Range(0, 6));
  pde->add_option("--csv", o.csv, "write coordinate,markov,gaussian rows");
  add_out(pde);

  // erf
  std::optional<long> compare_layers;
  auto* erf = app.add_subcommand("erf", "effective receptive field of a Dirac probe");
  erf->add_option("spec", spec_path, "network spec (JSON); residual parameters otherwise");
  deep.add_to(erf);
  erf->add_option("--compare-L", compare_layers, "report std(L) / std(compare-L)");
  erf->add_option("--csv", o.csv, "write per-layer profiles as CSV");
  add_out(erf);

  // shatter
  bool uniform = false;
  bool residual = false;
  std::vector<std::string> shatter_args;
  auto* shatter = app.add_subcommand("shatter", "strongest single-path weight");
  auto* uflag = shatter->add_flag("--uniform", uniform, "uniform receptive fields: r=<r> L=<L>");
  shatter->add_flag("--residual", residual, "residual chain: eps=<eps> delta=<Delta_ii> L=<L> n=<n>")
      ->excludes(uflag);
  shatter->add_option("args", shatter_args, "key=value parameters, or a spec file");
  add_out(shatter);

  // verify
  long vn = 8;
  long vm = 8;
  long vsel = 3;
  long vmc = 160'000;
  std::string vact = "pseudo_random";
  double noise = 0.1;
  auto* verify = app.add_subcommand("verify", "Monte Carlo oracle for the input-space capacity");
  verify->add_option("--n", vn, "input dimension")->check(CLI::PositiveNumber);
  verify->add_option("--m", vm, "feature dimension")->check(CLI::PositiveNumber);
  verify->add_option("--selector", vsel, "number of trainable coordinates")
      ->check(CLI::PositiveNumber);
  verify->add_option("--mc", vmc, "Monte Carlo sample count");
  verify->add_option("--seed", seed, "seed");
  verify->add_option("--activation", vact, "activation string");
  verify->add_option("--noise", noise, "target noise standard deviation");
  add_out(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (nu->parsed()) {
    const Activation act = parse_activation(act_text);
    json doc = {{"activation", to_string(act)}};
    if (act.kind != ActivationKind::custom) doc["nu"] = decoupling_nu(act);
    if (mc) {
      doc = to_json(estimate_nu_monte_carlo(act, *mc, seed), act);
    }
    emit(doc, o);
  } else if (layer->parsed()) {
    const NetworkSpec spec = load_network_spec(spec_path);
    const LayerChain c = build_chain(spec, spec_dir(spec_path));
    const long k = layer_index < 0 ? long(c.size()) : layer_index;
    if (k < 1 || k > long(c.size())) {
      throw InputError("--index must lie in [1, " + std::to_string(c.size()) + "]");
    }
    const std::string label = "layer " + std::to_string(k);
    const PropagationOperator d = layer_operator(c.layers[std::size_t(k - 1)], label);
    // Capacity arriving at this layer from the top of the stack.
    LayerChain above;
    above.layers.assign(c.layers.begin() + k, c.layers.end());
    const Index n_top = c.layers.back().n_out();
    const SpatialCapacity top = build_top_capacity(spec, n_top);
    const SpatialCapacity kappa_out = above.empty() ? top : propagate_chain(above, top).front();
    const SpatialCapacity kappa_in = propagate_single(d, kappa_out);
    json rows = json::array();
    for (Index i = 0; i < d.n_in(); ++i) rows.push_back(vector_json(d.matrix().row(i).transpose()));
    const auto& l = c.layers[std::size_t(k - 1)];
    emit({{"layer", k},
          {"flavor", flavor_name(l.flavor)},
          {"activation", to_string(l.activation)},
          {"D", rows},
          {"kappa_out", vector_json(kappa_out.values())},
          {"kappa_in", vector_json(kappa_in.values())},
          {"total", kappa_in.total()}},
         o);
  } else if (chain->parsed()) {
    const NetworkSpec spec = load_network_spec(spec_path);
    const LayerChain c = build_chain(spec, spec_dir(spec_path));
    const auto profiles = propagate_chain(c, build_top_capacity(spec, c.layers.back().n_out()));
    emit(run_report(spec, profiles), o);
    if (!o.csv.empty()) {
      std::ostringstream csv;
      write_profiles_csv(csv, profiles);
      emit_csv(o.csv, csv.str());
    }
  } else if (pde->parsed()) {
    const ResidualGenerator gen = deep.generator();
    const DeepLimitConfig cfg{deep.eps, deep.layers};
    const SpatialCapacity top = SpatialCapacity::dirac(gen.n, deep.probe_index());
    json doc = to_json(compare_markov_pde(gen, cfg, top, refinements));
    doc["params"] = deep.params();
    emit(doc, o);
    if (!o.csv.empty()) {
      const VectorXd markov = evolve_markov(gen, cfg, top).front().values();
      PdeField initial{top.values(), 1.0, 0.0};
      const VectorXd gauss = gaussian_solution(initial, gen.drift, gen.diffusion, cfg.depth_time(),
                                               gen.boundary == Boundary::periodic)
                                 .values;
      std::ostringstream csv;
      csv << "coordinate,markov,gaussian\n";
      for (Index i = 0; i < gen.n; ++i) {
        csv << i << ',' << shortest_repr(markov(i)) << ',' << shortest_repr(gauss(i)) << '\n';
      }
      emit_csv(o.csv, csv.str());
    }
  } else if (erf->parsed()) {
    ErfReport report;
    std::vector<SpatialCapacity> profiles;
    json params;
    if (!spec_path.empty()) {
      const NetworkSpec spec = load_network_spec(spec_path);
      const LayerChain c = build_chain(spec, spec_dir(spec_path));
      const Index n_top = c.layers.back().n_out();
      const Index probe = deep.probe < 0 ? n_top / 2 : deep.probe;
      report = erf_profile(c, probe);
      if (!o.csv.empty()) profiles = propagate_chain(c, SpatialCapacity::dirac(n_top, probe));
      params = {{"spec_hash", spec_hash(spec)}, {"L", long(c.size())}};
    } else {
      const ResidualGenerator gen = deep.generator();
      const DeepLimitConfig cfg{deep.eps, deep.layers};
      report = erf_profile(gen, cfg, deep.probe_index());
      if (!o.csv.empty()) {
        profiles = evolve_markov(gen, cfg, SpatialCapacity::dirac(gen.n, deep.probe_index()));
      }
      params = deep.params();
    }
    json doc = to_json(report);
    doc["params"] = params;
    if (compare_layers) {
      const long total = report.per_depth.back().traversed;
      if (*compare_layers < 1 || *compare_layers > total) {
        throw InputError("--compare-L must lie in [1, " + std::to_string(total) + "]");
      }
      const double a = report.std_after(total);
      const double b = report.std_after(*compare_layers);
      doc["compare"] = {{"L", *compare_layers}, {"std", b}, {"std_L", a}, {"ratio", a / b}};
    }
    emit(doc, o);
    if (!o.csv.empty()) {
      std::ostringstream csv;
      write_profiles_csv(csv, profiles);
      emit_csv(o.csv, csv.str());
    }
  } else if (shatter->parsed()) {
    std::string file;
    const auto kv = key_values(shatter_args, &file);
    ShatterReport report;
    if (!file.empty()) {
      if (uniform || residual || !kv.empty()) {
        throw InputError("shatter: give either a spec file or parameters");
      }
      const NetworkSpec spec = load_network_spec(file);
      report = max_path_weight(build_chain(spec, spec_dir(file)));
    } else if (uniform) {
      report = uniform_shatter_report(kv_long(kv, "r", 3), kv_long(kv, "L", 5));
    } else if (residual) {
      const double eps = kv_double(kv, "eps", 0.1);
      const double delta = kv_double(kv, "delta", -1.0);
      const long layers = kv_long(kv, "L", 10);
      const long n = kv_long(kv, "n", 7);
      if (!(delta < 0.0)) throw InputError("shatter: delta must be negative");
      if (n < 3) throw InputError("shatter: n must be at least 3");
      // Delta_ii = -2 D for the symmetric nearest-neighbour generator.
      const ResidualGenerator gen = residual_generator(n, 0.0, -delta / 2.0);
      const PropagationOperator op = residual_operator(gen, eps);
      LayerChain c;
      for (long l = 0; l < layers; ++l) {
        Layer lay;
        lay.weights = op;
        lay.flavor = LayerFlavor::residual;
        lay.eps = eps;
        c.layers.push_back(lay);
      }
      report = max_path_weight(c);
    } else {
      throw InputError("shatter: pass --uniform, --residual or a spec file");
    }
    emit(to_json(report), o);
  } else if (verify->parsed()) {
    if (vsel > vm) throw InputError("verify: --selector exceeds --m");
    ExperimentConfig cfg;
    cfg.p = ProjectionMatrix::normalized(
        random_gaussian_projection(vn, vm, derive_seed(seed, 1)).matrix());
    cfg.activation = parse_activation(vact);
    for (Index j = 0; j < vsel; ++j) cfg.selector.push_back(j);
    cfg.n_samples = vmc;
    cfg.seed = derive_seed(seed, 2);
    Rng rng(derive_seed(seed, 3));
    std::normal_distribution<double> normal;
    AugmentedTarget target;
    target.coeffs = VectorXd(vn * vm);
    for (Index i = 0; i < target.coeffs.size(); ++i) target.coeffs(i) = normal(rng);
    target.noise_std = noise;
    json doc = to_json(run_verification(cfg, target));
    doc["params"] = {{"n", vn},     {"m", vm},       {"selector", vsel}, {"mc", vmc},
                     {"seed", seed}, {"activation", to_string(cfg.activation)},
                     {"noise", noise}};
    emit(doc, o);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  try {
    return run(argc, argv);
  } catch (const capnet::NumericalError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const capnet::InputError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const capnet::UnsupportedError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
