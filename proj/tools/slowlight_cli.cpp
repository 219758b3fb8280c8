#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "slowlight/config.hpp"
#include "slowlight/design.hpp"
#include "slowlight/error.hpp"
#include "slowlight/exciton.hpp"
#include "slowlight/io.hpp"
#include "slowlight/pipeline.hpp"
#include "slowlight/purcell.hpp"
#include "slowlight/tcspc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slowlight;

namespace {

struct Globals {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool verbose = false;
};

struct Context {
  PipelineConfig config;
  fs::path out;
  int threads = 1;
  Logger log;
};

Context make_context(const Globals& g) {
  Context ctx;
  if (!g.config_path.empty()) {
    ctx.config = load_config(g.config_path);
  }
  if (g.seed) {
    ctx.config.simulation.seed = *g.seed;
  }
  ctx.out = g.out_dir.empty() ? fs::path(ctx.config.output_dir) : fs::path(g.out_dir);
  if (g.threads < 0) {
    throw ValidationError("--threads must be >= 0");
  }
  ctx.threads = g.threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                               : g.threads;
  if (g.verbose) {
    ctx.log = [](const std::string& msg) { std::cerr << "[slowlight] " << msg << '\n'; };
  }
  return ctx;
}

void log(const Context& ctx, const std::string& msg) {
  if (ctx.log) {
    ctx.log(msg);
  }
}

void write_json(const Context& ctx, const std::string& name, const json& value) {
  io::write_file_atomic(ctx.out / name, io::to_json_text(value));
  log(ctx, "wrote " + (ctx.out / name).string());
}

struct Reference {
  SolvedWaveguide solved;
  ModeField field;
  double n_g = 0.0;
};

Reference reference_mode(const Context& ctx, std::optional<double> k) {
  log(ctx, "solving bands");
  auto solved = solve_waveguide(ctx.config, ctx.threads);
  PipelineConfig cfg = ctx.config;
  if (k) {
    cfg.purcell.reference_k = *k;
  }
  const double kr = reference_k(cfg, solved.bands);
  const int band = solved.bands.guided_band;
  ModeField field = mode_field(solved.map, solved.bands, band, kr);
  const double ng = group_index(solved.bands, band, kr).value;
  return {std::move(solved), std::move(field), ng};
}

std::vector<TuningPoint> read_points(const fs::path& path, bool need_qd, const Context& ctx) {
  const io::CsvTable table = io::read_csv(path);
  const auto cdl = table.column("delta_lambda_nm");
  const auto cg = table.column("gamma_ns_inv");
  const auto cs = table.column("sigma");
  if (need_qd && !table.has_column("qd")) {
    throw ValidationError(path.string() + ": global fit needs a 'qd' column");
  }
  std::optional<NgModel> model;
  if (!table.has_column("n_g")) {
    log(ctx, "no n_g column; mapping detuning through the solved band");
    const auto solved = solve_waveguide(ctx.config, ctx.threads);
    model.emplace(solved.bands, ctx.config.calibration_offset_nm);
  }
  std::vector<TuningPoint> points;
  for (const auto& row : table.rows) {
    TuningPoint p;
    p.delta_lambda_nm = row[cdl];
    p.gamma = row[cg];
    p.sigma = row[cs];
    p.n_g = model ? (*model)(p.delta_lambda_nm) : row[table.column("n_g")];
    if (table.has_column("qd")) {
      p.qd = static_cast<int>(row[table.column("qd")]);
    }
    points.push_back(p);
  }
  return points;
}

ExcitonSystem read_exciton(const fs::path& path) {
  const json j = io::read_json(path);
  ExcitonSystem s;
  auto dipole = [&](const char* key, DipoleRates& d) {
    if (!j.contains(key)) {
      throw ValidationError(path.string() + ": missing '" + key + "'");
    }
    const json& o = j[key];
    d.gamma_b_r = o.value("gamma_b_r", d.gamma_b_r);
    d.gamma_b_nr = o.value("gamma_b_nr", d.gamma_b_nr);
    d.gamma_bd = o.value("gamma_bd", d.gamma_bd);
    d.gamma_db = o.value("gamma_db", d.gamma_db);
  };
  try {
    dipole("x", s.x);
    dipole("y", s.y);
    s.gamma_d_nr = j.value("gamma_d_nr", 0.0);
    if (j.contains("initial_populations")) {
      s.initial_populations = j["initial_populations"].get<std::array<double, 4>>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  s.validate();
  return s;
}

int run(CLI::App& app, const Globals& g) {
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Context ctx = make_context(g);

  if (name == "bands") {
    const auto solved = solve_waveguide(ctx.config, ctx.threads);
    io::write_file_atomic(ctx.out / "bands.csv", bands_csv(solved.bands));
    write_json(ctx, "bands.json", bands_summary(solved.bands));
  } else if (name == "modes") {
    const auto* kopt = sub->get_option("--k");
    std::optional<double> k;
    if (kopt->count() > 0) k = kopt->as<double>();
    const auto ref = reference_mode(ctx, k);
    io::write_file_atomic(ctx.out / "field.csv", field_csv(ref.field));
    write_json(ctx, "mode.json",
               {{"k", ref.field.k},
                {"band_index", ref.field.band_index},
                {"omega", ref.field.omega},
                {"wavelength_nm", ctx.config.geometry.lattice_constant_nm / ref.field.omega},
                {"n_g", ref.n_g},
                {"normalization_integral", ref.field.normalization_integral},
                {"mirror_parity", mirror_parity(ref.field)}});
  } else if (name == "purcell") {
    const auto ref = reference_mode(ctx, std::nullopt);
    const auto& pc = ctx.config.purcell;
    const auto map = purcell_map(ref.field, ref.n_g, pc.orientation, ctx.config.geometry, pc.options);
    io::write_file_atomic(ctx.out / "purcell_map.csv", purcell_map_csv(map));
    write_json(ctx, "positions.json",
               {{"reference_k", ref.field.k},
                {"reference_n_g", ref.n_g},
                {"positions", position_report(ctx.config, ref.field, ref.n_g, ctx.threads)}});
  } else if (name == "branching") {
    const auto ref = reference_mode(ctx, std::nullopt);
    const auto& pc = ctx.config.purcell;
    json rows = json::array();
    for (const auto& p : pc.positions) {
      json row = {{"position", {p.x, p.y}}};
      if (inside_hole(ctx.config.geometry, p)) {
        row["error"] = "position lies inside an air hole";
      } else {
        const auto br = branching_ratio(ref.field, p, ref.n_g);
        const auto avg = averaged_branching_ratio(ref.field, p, pc.sigma_nm, pc.samples,
                                                  ctx.config.simulation.seed, ctx.config.geometry);
        row["kind"] = to_string(br.kind);
        row["value"] = br.value;
        row["averaged_kind"] = to_string(avg.kind);
        row["averaged_value"] = avg.value;
      }
      rows.push_back(row);
    }
    write_json(ctx, "branching.json",
               {{"reference_k", ref.field.k}, {"sigma_nm", pc.sigma_nm}, {"positions", rows}});
  } else if (name == "simulate") {
    const auto* gopt = sub->get_option("--gamma");
    const auto* eopt = sub->get_option("--exciton");
    DecayModel model;
    if (gopt->count() > 0) {
      const double gamma = gopt->as<double>();
      if (!(gamma > 0.0)) throw ValidationError("--gamma must be > 0");
      model = DecayModel::single_exponential(gamma);
    } else if (eopt->count() > 0) {
      model = to_decay_model(read_exciton(eopt->as<std::string>()));
    } else {
      throw ValidationError("simulate needs --gamma or --exciton");
    }
    const auto hist = simulate_histogram(model, ctx.config.simulation);
    if (hist.truncated) {
      std::cerr << "warning: window shorter than 3 lifetimes of the slowest component\n";
    }
    io::write_histogram(ctx.out / "histogram.csv", hist);
    log(ctx, "wrote " + (ctx.out / "histogram.csv").string());
  } else if (name == "fit") {
    const auto data = io::read_histogram(sub->get_option("--histogram")->as<std::string>());
    const auto* topt = sub->get_option("--t-start");
    double t_start = topt->count() > 0 ? topt->as<double>()
                     : ctx.config.fit.t_start_ns ? *ctx.config.fit.t_start_ns
                                                 : default_fit_start(data);
    const std::string model = sub->get_option("--model")->as<std::string>();
    const FitResult fit = model == "biexp" ? fit_biexp(data, t_start, ctx.config.fit.options)
                                           : fit_single_exp(data, t_start, ctx.config.fit.options);
    json out = io::to_json(fit);
    out["t_start_ns"] = t_start;
    write_json(ctx, "fit.json", out);
  } else if (name == "tuning-fit") {
    const auto points = read_points(sub->get_option("--points")->as<std::string>(), false, ctx);
    const auto fit = fit_tuning_curve(points, ctx.config.gamma_bulk_r);
    write_json(ctx, "tuning_fit.json", io::to_json(fit, points));
  } else if (name == "global-fit") {
    const auto points = read_points(sub->get_option("--points")->as<std::string>(), true, ctx);
    const std::string label = sub->get_option("--label")->as<std::string>();
    const auto fit = global_fit({label, points}, ctx.config.gamma_bulk_r);
    json out = io::to_json(fit, points);
    out["label"] = label;
    write_json(ctx, "global_fit.json", out);
  } else if (name == "design") {
    DesignSpec spec = ctx.config.design;
    auto set = [&](const char* flag, double& target) {
      const auto* o = sub->get_option(flag);
      if (o->count() > 0) target = o->as<double>();
    };
    set("--target-nm", spec.target_wavelength_nm);
    set("--max-detuning-nm", spec.max_detuning_nm);
    auto range = [&](const char* flag, double& lo, double& hi) {
      const auto* o = sub->get_option(flag);
      if (o->count() > 0) {
        const auto v = o->as<std::vector<double>>();
        lo = v[0];
        hi = v[1];
      }
    };
    range("--a-range", spec.a_min_nm, spec.a_max_nm);
    range("--r-range", spec.r_min_nm, spec.r_max_nm);
    DesignSettings settings;
    settings.resolution = ctx.config.solver.resolution;
    settings.solver = ctx.config.solver.settings;
    settings.solver.threads = ctx.threads;
    const auto result = design_geometry(spec, settings);
    write_json(ctx, "design.json",
               {{"geometry",
                 {{"a_nm", result.geometry.lattice_constant_nm},
                  {"r_nm", result.geometry.hole_radius_nm},
                  {"n_eff", result.geometry.n_eff},
                  {"supercell_rows", result.geometry.supercell_rows}}},
                {"band_edge_wavelength_nm", result.band_edge_wavelength_nm},
                {"target_nm", spec.target_wavelength_nm},
                {"detuning_nm", result.detuning_nm},
                {"band_solves", result.band_solves}});
  } else if (name == "proximity") {
    const Point2 p{sub->get_option("--x")->as<double>(), sub->get_option("--y")->as<double>()};
    const auto prox = surface_proximity(p, ctx.config.geometry);
    const json out = {{"position", {p.x, p.y}},
                      {"a_nm", ctx.config.geometry.lattice_constant_nm},
                      {"r_nm", ctx.config.geometry.hole_radius_nm},
                      {"distance_nm", prox.distance_nm},
                      {"inside_hole", prox.inside_hole},
                      {"yield_class", to_string(prox.yield)}};
    write_json(ctx, "proximity.json", out);
    std::cout << io::format_number(prox.distance_nm) << " nm (" << to_string(prox.yield)
              << " yield)\n";
  } else if (name == "pipeline") {
    const auto summary = run_pipeline(ctx.config, ctx.out, ctx.threads, ctx.log);
    for (const auto& grp : summary.groups) {
      std::cout << grp.label << ": A = " << io::format_number(grp.fit.coupling) << '\n';
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-light emitter modelling for W1 photonic-crystal waveguides"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "Pipeline configuration (JSON)");
  app.add_option("--out", g.out_dir, "Output directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config seed");
  app.add_option("--threads", g.threads, "Worker threads; 0 uses every core")->capture_default_str();
  app.add_flag("--verbose", g.verbose, "Progress messages on stderr");

  app.add_subcommand("bands", "Guided-band dispersion and group index");
  app.add_subcommand("modes", "Mode field of the guided band")
      ->add_option("--k", "Wavevector (units of 2 pi / a); nearest sample is used");
  app.add_subcommand("purcell", "Purcell map and per-position uncertainty bands");
  app.add_subcommand("branching", "y/x branching ratios at the configured positions");
  auto* simulate = app.add_subcommand("simulate", "Synthetic TCSPC histogram");
  simulate->add_option("--gamma", "Single-exponential decay rate, ns^-1");
  simulate->add_option("--exciton", "Exciton system JSON")->check(CLI::ExistingFile);
  auto* fit = app.add_subcommand("fit", "Poisson maximum-likelihood decay fit");
  fit->add_option("--histogram", "Histogram CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", "single or biexp")
      ->default_val("single")
      ->check(CLI::IsMember({"single", "biexp"}));
  fit->add_option("--t-start", "Fit start, ns");
  app.add_subcommand("tuning-fit", "Linear fit of decay rate against group index")
      ->add_option("--points", "Tuning-point CSV")
      ->required()
      ->check(CLI::ExistingFile);
  auto* global = app.add_subcommand("global-fit", "Shared-coupling fit over several emitters");
  global->add_option("--points", "Tuning-point CSV with a qd column")
      ->required()
      ->check(CLI::ExistingFile);
  global->add_option("--label", "Group label")->default_val("group");
  auto* design = app.add_subcommand("design", "Choose lattice constant and hole radius");
  design->add_option("--target-nm", "Emitter wavelength, nm");
  design->add_option("--max-detuning-nm", "Largest allowed band-edge offset, nm");
  design->add_option("--a-range", "Lattice constant range, nm")->expected(2);
  design->add_option("--r-range", "Hole radius range, nm")->expected(2);
  auto* proximity = app.add_subcommand("proximity", "Distance from an emitter to the nearest hole");
  proximity->add_option("--x", "x position, units of a")->required();
  proximity->add_option("--y", "y position, units of a")->required();
  app.add_subcommand("pipeline", "Bands to global fit from one configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) {
    g.seed = seed;
  }
  try {
    return run(app, g);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
