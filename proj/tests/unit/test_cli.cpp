#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "slowlight_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run run(const std::string& args) {
  const auto out = work() / "stdout.txt";
  const auto err = work() / "stderr.txt";
  const std::string cmd = std::string("\"") + SLOWLIGHT_CLI + "\" " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write(const std::string& name, const std::string& text) {
  const auto p = work() / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmallSolver =
    R"("geometry": {"supercell_rows": 4}, "solver": {"resolution": 16, "cutoff": 3.0, "n_uniform": 12, "n_tail": 4, "tail_width": 0.03})";

} // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("--help").code == 0);
  CHECK(run("fit --histogram /nonexistent.csv").code == 2);
  CHECK(run("--config /nonexistent.json bands").code == 2);
}

TEST_CASE("invalid geometry exits 2 naming the invariant") {
  const auto cfg = write("bad_geometry.json", R"({"geometry": {"a_nm": 240, "r_nm": 130}})");
  const auto r = run("--config " + cfg.string() + " bands");
  CHECK(r.code == 2);
  CHECK(r.err.find("a/2") != std::string::npos);
}

TEST_CASE("schema violations exit 2 with a path-qualified message") {
  const auto cfg = write("unknown_key.json", R"({"simulation": {"seeds": 3}})");
  const auto r = run("--config " + cfg.string() + " simulate --gamma 3.9");
  CHECK(r.code == 2);
  CHECK(r.err.find("/simulation/seeds") != std::string::npos);
}

TEST_CASE("simulate then fit, with the seed flag overriding the config") {
  const auto cfg = write("sim.json", R"({"simulation": {"seed": 17}})");
  const auto dir = work() / "sim";
  REQUIRE(run("--config " + cfg.string() + " --out " + dir.string() + " simulate --gamma 3.9").code == 0);
  const std::string first = slurp(dir / "histogram.csv");
  REQUIRE(run("--config " + cfg.string() + " --out " + dir.string() + " simulate --gamma 3.9").code == 0);
  CHECK(slurp(dir / "histogram.csv") == first);
  CHECK(json::parse(slurp(dir / "histogram.json"))["seed"].get<int>() == 17);

  const auto other = work() / "sim_seed";
  REQUIRE(run("--config " + cfg.string() + " --seed 18 --out " + other.string() + " simulate --gamma 3.9").code == 0);
  CHECK(slurp(other / "histogram.csv") != first);
  CHECK(json::parse(slurp(other / "histogram.json"))["seed"].get<int>() == 18);

  const auto hist = dir / "histogram.csv";
  REQUIRE(run("--out " + dir.string() + " fit --histogram " + hist.string()).code == 0);
  const auto fit = json::parse(slurp(dir / "fit.json"));
  CHECK(fit["converged"].get<bool>());
  CHECK(std::abs(fit["parameters"]["gamma"]["value"].get<double>() - 3.9) < 0.1);
  CHECK(run("--out " + dir.string() + " fit --model triple --histogram " + hist.string()).code == 2);
  CHECK(run("--out " + dir.string() + " fit --model biexp --histogram " + hist.string()).code == 0);
}

TEST_CASE("simulate from an exciton system file") {
  const auto sys = write("exciton.json", R"({"x": {"gamma_b_r": 1.0, "gamma_b_nr": 2.9},
                                             "y": {"gamma_b_r": 2.0, "gamma_b_nr": 1.0, "gamma_bd": 0.2, "gamma_db": 0.2},
                                             "gamma_d_nr": 0.1})");
  const auto dir = work() / "exciton";
  CHECK(run("--out " + dir.string() + " simulate --exciton " + sys.string()).code == 0);
  CHECK(fs::exists(dir / "histogram.csv"));
  const auto bad = write("exciton_bad.json", R"({"x": {"gamma_b_r": -1.0}, "y": {}})");
  CHECK(run("--out " + dir.string() + " simulate --exciton " + bad.string()).code == 2);
  CHECK(run("--out " + dir.string() + " simulate").code == 2);
}

TEST_CASE("a flat histogram is a numerical failure") {
  const auto cfg = write("flat.json", R"({"simulation": {"seed": 2, "background_fraction": 1.0}})");
  const auto dir = work() / "flat";
  REQUIRE(run("--config " + cfg.string() + " --out " + dir.string() + " simulate --gamma 3.9").code == 0);
  CHECK(run("--out " + dir.string() + " fit --histogram " + (dir / "histogram.csv").string()).code == 3);
}

TEST_CASE("tuning and global fits from point tables") {
  const auto dir = work() / "tuning";
  const auto pts = write("points.csv",
                         "delta_lambda_nm,gamma_ns_inv,sigma,n_g,qd\n"
                         "3,6.0,0.05,32,0\n4,5.0,0.05,26,0\n2.5,7.6,0.05,48,0\n"
                         "3,7.0,0.05,32,1\n4,6.0,0.05,26,1\n2.5,8.6,0.05,48,1\n");
  REQUIRE(run("--out " + dir.string() + " tuning-fit --points " + pts.string()).code == 0);
  CHECK(fs::exists(dir / "tuning_fit.json"));
  REQUIRE(run("--out " + dir.string() + " global-fit --label demo --points " + pts.string()).code == 0);
  const auto g = json::parse(slurp(dir / "global_fit.json"));
  CHECK(g["label"] == "demo");
  CHECK(g["coupling_A"].get<double>() > 0.0);
  const auto noqd = write("noqd.csv", "delta_lambda_nm,gamma_ns_inv,sigma,n_g\n3,6,0.05,32\n4,5,0.05,26\n");
  CHECK(run("--out " + dir.string() + " global-fit --points " + noqd.string()).code == 2);
  const auto flat = write("flatpts.csv", "delta_lambda_nm,gamma_ns_inv,sigma,n_g\n3,6,0.05,32\n4,5,0.05,32\n");
  CHECK(run("--out " + dir.string() + " tuning-fit --points " + flat.string()).code == 3);
}

TEST_CASE("proximity prints the emitter-to-surface distance") {
  const auto cfg = write("prox.json", R"({"geometry": {"a_nm": 247, "r_nm": 76}})");
  const auto dir = work() / "prox";
  const auto r = run("--config " + cfg.string() + " --out " + dir.string() + " proximity --x 0.5 --y 0.5");
  CHECK(r.code == 0);
  const auto j = json::parse(slurp(dir / "proximity.json"));
  CHECK(std::abs(j["distance_nm"].get<double>() - 77.1) < 0.5);
  CHECK(j["yield_class"] == "low");
}

TEST_CASE("band, mode, Purcell and branching subcommands on a small solver") {
  const auto cfg = write("small.json", std::string("{") + kSmallSolver +
                                           R"(, "purcell": {"samples": 200}})");
  const auto dir = work() / "small";
  const std::string base = "--config " + cfg.string() + " --out " + dir.string() + " ";
  REQUIRE(run(base + "bands").code == 0);
  CHECK(slurp(dir / "bands.csv").rfind("k,band_index,omega,n_g\n", 0) == 0);
  REQUIRE(run(base + "modes --k 0.45").code == 0);
  CHECK(slurp(dir / "field.csv").rfind("x,y,re_ex,im_ex,re_ey,im_ey\n", 0) == 0);
  const auto mode = json::parse(slurp(dir / "mode.json"));
  CHECK(std::abs(mode["normalization_integral"].get<double>() - 1.0) < 1e-6);
  REQUIRE(run(base + "purcell").code == 0);
  CHECK(slurp(dir / "purcell_map.csv").rfind("x,y,F_P,valid\n", 0) == 0);
  const auto positions = json::parse(slurp(dir / "positions.json"));
  CHECK(positions["positions"].size() == 7);
  CHECK(positions["positions"][4]["uncertainty"]["y"].contains("p16"));
  REQUIRE(run(base + "branching").code == 0);
  CHECK(json::parse(slurp(dir / "branching.json"))["positions"][3]["kind"] == "y-dominant");
}

TEST_CASE("design rejects targets outside the supported band") {
  CHECK(run("design --target-nm 700").code == 2);
  CHECK(run("design --a-range 250 240").code == 2);
}
