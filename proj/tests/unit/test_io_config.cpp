#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "slowlight/config.hpp"
#include "slowlight/error.hpp"
#include "slowlight/io.hpp"

using namespace slowlight;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "slowlight_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool mentions(const ValidationError& e, const std::string& text) {
  return std::string(e.what()).find(text) != std::string::npos;
}

} // namespace

TEST_CASE("numbers round-trip at 17 significant digits") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-310, 914.93141595090663}) {
    CHECK(std::strtod(io::format_number(v).c_str(), nullptr) == v);
  }
  CHECK(io::format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  const std::string text = io::to_json_text({{"b", 0.1}, {"a", {1.0, 2.0}}, {"c", std::nan("")}});
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(json::parse(text)["b"].get<double>() == 0.1);
}

TEST_CASE("atomic writes leave no temporary files") {
  const auto path = scratch("nested/dir/out.txt");
  fs::remove_all(path.parent_path());
  io::write_file_atomic(path, "hello\n");
  io::write_file_atomic(path, "again\n");
  CHECK(slurp(path) == "again\n");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(path.parent_path())) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("csv round trip and error reporting") {
  io::CsvWriter w({"x", "y"});
  w.row({0.1, 2.0});
  w.row({1e-20, -3.5});
  const auto path = scratch("t.csv");
  io::write_file_atomic(path, w.text());
  const auto table = io::read_csv(path);
  CHECK(table.header == std::vector<std::string>{"x", "y"});
  CHECK(table.rows[1][0] == 1e-20);
  CHECK(table.column("y") == 1);
  CHECK_THROWS_AS(table.column("z"), ValidationError);
  CHECK_THROWS_AS(io::read_csv(scratch("missing.csv")), ValidationError);
  io::write_file_atomic(path, "x,y\n1,abc\n");
  CHECK_THROWS_AS(io::read_csv(path), ValidationError);
}

TEST_CASE("histograms round-trip through CSV and metadata") {
  TcspcSettings s;
  s.seed = 5;
  s.n_bins = 64;
  s.bin_width_ns = 0.1;
  const auto hist = simulate_histogram(DecayModel::single_exponential(2.0), s);
  const auto path = scratch("h.csv");
  io::write_histogram(path, hist);
  const auto data = io::read_histogram(path);
  REQUIRE(data.edges.size() == 65);
  CHECK(data.edges.back() == doctest::Approx(6.4));
  for (int i = 0; i < 64; ++i) {
    CHECK(data.counts[i] == static_cast<double>(hist.counts[i]));
  }
  const auto meta = io::read_json(io::metadata_path(path));
  CHECK(meta["seed"].get<std::uint64_t>() == 5);
  CHECK(meta["n_bins"].get<int>() == 64);
}

TEST_CASE("empty config gives defaults") {
  const auto c = parse_config(json::object());
  CHECK(c.geometry.lattice_constant_nm == 240.0);
  CHECK(c.purcell.positions.size() == 7);
  CHECK(c.simulation.total_counts == 100000);
  CHECK(c.output_dir == "out");
}

TEST_CASE("config values are read into every section") {
  const json j = json::parse(R"({
    "geometry": {"a_nm": 247, "r_nm": 76, "n_eff": 2.9, "supercell_rows": 6},
    "solver": {"resolution": 24, "cutoff": 4.0, "k_min": 0.35},
    "purcell": {"reference_k": 0.48, "positions": [[0.5, 0.5]]},
    "exciton": {"gamma_bd": 0.1},
    "groups": [{"label": "g", "position": [0.5, 0], "qds": [{"gamma_nr": 1, "detunings_nm": [3, 4]}]}],
    "simulation": {"seed": 9, "n_bins": 256},
    "fit": {"t_start_ns": 0.1, "parameterization": "lifetime"},
    "design": {"a_range_nm": [230, 250]},
    "output_dir": "results"
  })");
  const auto c = parse_config(j);
  CHECK(c.geometry.hole_radius_nm == 76.0);
  CHECK(c.design.supercell_rows == 6);
  CHECK(c.design.n_eff == 2.9);
  CHECK(c.solver.settings.cutoff == 4.0);
  CHECK(c.solver.k_samples().front() == doctest::Approx(0.35));
  CHECK(*c.purcell.reference_k == 0.48);
  CHECK(c.purcell.positions.size() == 1);
  CHECK(c.exciton.gamma_db == 0.1);
  CHECK(c.groups[0].qds[0].detunings_nm[1] == 4.0);
  CHECK(c.simulation.seed == 9);
  CHECK(c.fit.options.parameterization == RateParameterization::Lifetime);
  CHECK(c.design.a_max_nm == 250.0);
  CHECK(c.output_dir == "results");
}

TEST_CASE("schema violations carry JSON pointers") {
  try {
    parse_config(json::parse(R"({"geometry": {"a_nm": -3, "colour": 1}, "simulation": {"n_bins": "x"}})"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "/geometry/a_nm"));
    CHECK(mentions(e, "/geometry/colour: unknown key"));
    CHECK(mentions(e, "/simulation/n_bins"));
  }
  try {
    parse_config(json::parse(R"({"unknown": 1})"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "/unknown: unknown key"));
  }
  try {
    parse_config(json::parse(R"({"groups": [{"label": "g", "position": [0.5]}]})"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(mentions(e, "/groups/0"));
    CHECK(mentions(e, "qds"));
  }
}

TEST_CASE("geometry invariants are enforced after the schema") {
  try {
    parse_config(json::parse(R"({"geometry": {"a_nm": 240, "r_nm": 125}})"));
    FAIL("expected GeometryError");
  } catch (const GeometryError& e) {
    CHECK(mentions(e, "a/2"));
  }
}

TEST_CASE("the schema subset validator") {
  const json schema = json::parse(R"({
    "type": "object", "additionalProperties": false, "required": ["n"],
    "properties": {
      "n": {"type": "integer", "minimum": 1, "maximum": 5},
      "e": {"enum": ["a", "b"]},
      "v": {"$ref": "#/$defs/pair"}
    },
    "$defs": {"pair": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number", "exclusiveMinimum": 0}}}
  })");
  CHECK(schema_errors(json::parse(R"({"n": 3, "e": "a", "v": [1, 2]})"), schema).empty());
  CHECK(schema_errors(json::parse(R"({"n": 3.0})"), schema).empty());
  CHECK(schema_errors(json::parse(R"({"n": 3.5})"), schema).size() == 1);
  CHECK(schema_errors(json::parse(R"({"n": 9})"), schema).size() == 1);
  CHECK(schema_errors(json::parse(R"({"n": 1, "e": "c"})"), schema).size() == 1);
  CHECK(schema_errors(json::parse(R"({"n": 1, "v": [0, 1, 2]})"), schema).size() == 2);
  CHECK(schema_errors(json::parse(R"({})"), schema).size() == 1);
  CHECK(config_schema().contains("properties"));
}

TEST_CASE("config files are loaded from disk") {
  const auto path = scratch("c.json");
  io::write_file_atomic(path, R"({"simulation": {"seed": 11}})");
  CHECK(load_config(path).simulation.seed == 11);
  CHECK_THROWS_AS(load_config(scratch("nope.json")), ValidationError);
  io::write_file_atomic(path, "{not json");
  CHECK_THROWS_AS(load_config(path), ValidationError);
}
