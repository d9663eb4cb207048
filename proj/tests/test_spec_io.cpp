#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "capnet/numfmt.hpp"
#include "capnet/spec.hpp"

using namespace capnet;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "capnet_spec_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

json sample_doc() {
  return json::parse(R"({
    "layers": [
      {"kind": "dense", "n_in": 6, "n_out": 4, "weights": "random_gaussian:5"},
      {"kind": "dense", "n_in": 4, "n_out": 4, "weights": "uniform:3", "repeat": 2},
      {"kind": "differential", "n_in": 4, "n_out": 4, "weights": "random_gaussian:9", "eps": 0.5},
      {"kind": "residual", "n_in": 4, "n_out": 4, "weights": "residual:0.1,0.2,1",
       "boundary": "reflecting"}
    ],
    "top_capacity": "dirac:2"
  })");
}

std::string error_of(const json& doc) {
  try {
    parse_network_spec(doc);
  } catch (const SpecError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(fixed17_repr(1.0) == "1.0");
  CHECK(fixed17_repr(0.1) == "0.10000000000000001");
  CHECK(fixed17_repr(-3.0) == "-3.0");
  CHECK(fixed17_repr(1e300) == "1.0000000000000001e+300");
  CHECK(fixed17_repr(std::numeric_limits<double>::quiet_NaN()) == "null");
  CHECK(shortest_repr(0.1) == "0.1");
  CHECK(shortest_repr(1.0 / 3.0) == "0.3333333333333333");
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17}) {
    CHECK(std::stod(shortest_repr(x)) == x);
    CHECK(std::stod(fixed17_repr(x)) == x);
  }
}

TEST_CASE("canonical dump sorts keys and is stable") {
  const json doc = json::parse(R"({"b": [1, 2.5, null], "a": {"z": 0.1, "y": "s"}, "c": []})");
  const std::string text = canonical_dump(doc);
  CHECK(text ==
        "{\n"
        "  \"a\": {\n"
        "    \"y\": \"s\",\n"
        "    \"z\": 0.10000000000000001\n"
        "  },\n"
        "  \"b\": [1, 2.5, null],\n"
        "  \"c\": []\n"
        "}\n");
  CHECK(json::parse(text) == doc);
  CHECK(canonical_dump(json::parse(text)) == text);
}

TEST_CASE("spec round trip") {
  const NetworkSpec spec = parse_network_spec(sample_doc());
  REQUIRE(spec.layers.size() == 4);
  CHECK(spec.layers[1].repeat == 2);
  CHECK(spec.layers[2].eps == 0.5);
  CHECK(spec.layers[3].boundary == "reflecting");
  const json canonical = to_json(spec);
  const NetworkSpec again = parse_network_spec(canonical);
  CHECK(to_json(again) == canonical);
  CHECK(canonical_dump(to_json(again)) == canonical_dump(canonical));
  CHECK(spec_hash(again) == spec_hash(spec));
  CHECK(spec_hash(spec).size() == 16);

  NetworkSpec changed = spec;
  changed.layers[0].weights = "random_gaussian:6";
  CHECK(spec_hash(changed) != spec_hash(spec));

  json vec = sample_doc();
  vec["top_capacity"] = {0.5, 0.5, 0.0, 1.0};
  CHECK(to_json(parse_network_spec(vec)) == to_json(parse_network_spec(to_json(parse_network_spec(vec)))));
}

TEST_CASE("spec errors name the offending layer") {
  json doc = sample_doc();
  doc["layers"][1]["n_in"] = 5;
  CHECK(error_of(doc).find("layer 2") != std::string::npos);

  doc = sample_doc();
  doc["layers"][2]["activation"] = "tanh";
  CHECK(error_of(doc).find("layer 3") != std::string::npos);

  doc = sample_doc();
  doc["layers"][2].erase("eps");
  CHECK(error_of(doc).find("layer 3") != std::string::npos);

  doc = sample_doc();
  doc["layers"][3]["weights"] = "uniform:2";
  CHECK(error_of(doc).find("layer 4") != std::string::npos);

  doc = sample_doc();
  doc["layers"][0]["kind"] = "conv";
  CHECK(error_of(doc).find("layer 1") != std::string::npos);

  doc = sample_doc();
  doc["layers"][0].erase("weights");
  CHECK(error_of(doc).find("layer 1") != std::string::npos);

  doc = sample_doc();
  doc["layers"][0]["n_out"] = "four";
  CHECK(error_of(doc).find("layer 1") != std::string::npos);

  CHECK_FALSE(error_of(json::parse(R"({"layers": []})")).empty());
  CHECK_FALSE(error_of(json::array()).empty());
  doc = sample_doc();
  doc["top_capacity"] = "peak";
  CHECK_FALSE(error_of(doc).empty());
}

TEST_CASE("building chains from a spec") {
  const NetworkSpec spec = parse_network_spec(sample_doc());
  const LayerChain chain = build_chain(spec, ".");
  REQUIRE(chain.size() == 5);
  CHECK(chain.layers[2].flavor == LayerFlavor::standard);
  CHECK(chain.layers[3].flavor == LayerFlavor::differential);
  CHECK(chain.layers[4].flavor == LayerFlavor::residual);
  const SpatialCapacity top = build_top_capacity(spec, 4);
  CHECK(top[2] == 1.0);
  const auto profiles = propagate_chain(chain, top);
  for (const auto& p : profiles) CHECK(p.total() == doctest::Approx(1.0).epsilon(1e-12));

  NetworkSpec uniform = spec;
  uniform.top_capacity = std::string("uniform");
  CHECK(build_top_capacity(uniform, 4).total() == 4.0);
  uniform.top_capacity = std::vector<double>{1.0, 2.0};
  CHECK_THROWS_AS(build_top_capacity(uniform, 4), SpecError);
  uniform.top_capacity = std::string("dirac:7");
  CHECK_THROWS_AS(build_top_capacity(uniform, 4), SpecError);

  json too_large = sample_doc();
  too_large["layers"][3]["weights"] = "residual:0.9,0,1";
  CHECK_THROWS_AS(build_chain(parse_network_spec(too_large), "."), NumericalError);
}

TEST_CASE("uniform and random projections") {
  const MatrixXd u = uniform_projection(9, 3, 3);
  for (Index j = 0; j < 3; ++j) {
    CHECK(u.col(j).norm() == doctest::Approx(1.0));
    CHECK((u.col(j).array() > 0.0).count() == 3);
  }
  CHECK(u(0, 0) > 0.0);
  CHECK(u(8, 0) > 0.0);  // cyclic neighbour of row 0
  CHECK(u(3, 1) > 0.0);
  CHECK_THROWS_AS(uniform_projection(3, 3, 4), SpecError);

  const MatrixXd g = random_gaussian_projection(5, 4, 3);
  CHECK((g - random_gaussian_projection(5, 4, 3)).norm() == 0.0);
  CHECK((g - random_gaussian_projection(5, 4, 4)).norm() > 0.0);
  for (Index j = 0; j < 4; ++j) CHECK(g.col(j).norm() == doctest::Approx(1.0));
}

TEST_CASE("CSV weights") {
  const auto dir = scratch_dir();
  write_file(dir / "w.csv", "1, 0\n0,1\r\n\n0.5,0.5\n");
  const MatrixXd m = read_csv_matrix(dir / "w.csv");
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 2);
  CHECK(m(2, 1) == 0.5);
  write_file(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_csv_matrix(dir / "ragged.csv"), SpecError);
  write_file(dir / "text.csv", "a,b\n");
  CHECK_THROWS_AS(read_csv_matrix(dir / "text.csv"), SpecError);
  CHECK_THROWS_AS(read_csv_matrix(dir / "missing.csv"), SpecError);

  write_file(dir / "spec.json", R"({"layers": [
      {"kind": "dense", "n_in": 3, "n_out": 2, "weights": "w.csv"}],
      "top_capacity": [1.0, 0.0]})");
  const NetworkSpec spec = load_network_spec(dir / "spec.json");
  const LayerChain chain = build_chain(spec, dir);
  const auto profiles = propagate_chain(chain, build_top_capacity(spec, 2));
  CHECK(profiles.front()[0] == doctest::Approx(0.8));
  CHECK(profiles.front()[2] == doctest::Approx(0.2));

  write_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(load_network_spec(dir / "bad.json"), SpecError);
}

TEST_CASE("profile CSV and run report") {
  std::vector<SpatialCapacity> profiles = {SpatialCapacity::uniform(2, 1.0),
                                           SpatialCapacity::dirac(2, 1)};
  std::ostringstream out;
  write_profiles_csv(out, profiles);
  CHECK(out.str() == "layer,coordinate,kappa\n0,0,0.5\n0,1,0.5\n1,0,0\n1,1,1\n");

  const NetworkSpec spec = parse_network_spec(sample_doc());
  const json report = run_report(spec, profiles);
  CHECK(report["totals"].size() == 2);
  CHECK(report["metadata"]["tool_version"] == kToolVersion);
  CHECK(report["metadata"]["seeds"] == json::array({5, 9}));
  CHECK(report["metadata"]["spec_hash"] == spec_hash(spec));
}
