#include "slowlight/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slowlight/design.hpp"
#include "slowlight/error.hpp"
#include "slowlight/exciton.hpp"
#include "slowlight/io.hpp"
#include "slowlight/purcell.hpp"
#include "slowlight/random.hpp"
#include "slowlight/tcspc.hpp"

namespace slowlight {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kBandStream = 0x100;
constexpr std::uint64_t kHistogramStream = 0x10000;

std::string file_label(const std::string& label) {
  std::string out;
  for (char c : label) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return out.empty() ? "group" : out;
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

// Centred difference inside the range; the first sample has no left
// neighbour, so its slope comes from the eigenvector instead.
GroupIndex tabulated_group_index(const BandStructure& bands, int band, std::size_t ik) {
  if (ik == 0 && bands.k.front() > 0.0) {
    return group_index_hellmann_feynman(bands, band, bands.k[ik]);
  }
  return group_index(bands, band, bands.k[ik]);
}

void note(const Logger& log, const std::string& msg) {
  if (log) {
    log(msg);
  }
}

} // namespace

SolvedWaveguide solve_waveguide(const PipelineConfig& config, int threads) {
  config.geometry.validate();
  SolverSettings settings = config.solver.settings;
  settings.threads = threads;
  DielectricMap map = build_supercell(config.geometry, config.solver.resolution);
  const auto ks = config.solver.k_samples();
  BandStructure bands = solve_bands(map, ks, settings.n_bands, settings);
  return {std::move(map), std::move(bands)};
}

double reference_k(const PipelineConfig& config, const BandStructure& bands) {
  if (config.purcell.reference_k) {
    const double want = *config.purcell.reference_k;
    return *std::min_element(bands.k.begin(), bands.k.end(), [want](double a, double b) {
      return std::abs(a - want) < std::abs(b - want);
    });
  }
  double best = -1.0;
  for (double k : bands.k) {
    if (k < 0.5 && k > best) {
      best = k;
    }
  }
  if (best < 0.0) {
    throw ValidationError("no k sample below the zone edge for the reference mode");
  }
  return best;
}

std::string bands_csv(const BandStructure& bands) {
  io::CsvWriter csv({"k", "band_index", "omega", "n_g"});
  for (int b = 0; b < bands.n_bands(); ++b) {
    for (std::size_t i = 0; i < bands.k.size(); ++i) {
      const double ng = bands.k.size() >= 3 ? tabulated_group_index(bands, b, i).value
                                            : std::numeric_limits<double>::quiet_NaN();
      csv.row({bands.k[i], static_cast<double>(b), bands.omega[b][i], ng});
    }
  }
  return csv.text();
}

std::string field_csv(const ModeField& field) {
  io::CsvWriter csv({"x", "y", "re_ex", "im_ex", "re_ey", "im_ey"});
  for (int ix = 0; ix < field.nx; ++ix) {
    for (int iy = 0; iy < field.ny; ++iy) {
      const auto p = field.sample_position(ix, iy);
      const auto i = field.index(ix, iy);
      csv.row({p.x, p.y, field.ex[i].real(), field.ex[i].imag(), field.ey[i].real(),
               field.ey[i].imag()});
    }
  }
  return csv.text();
}

std::string purcell_map_csv(const PurcellMap& map) {
  io::CsvWriter csv({"x", "y", "F_P", "valid"});
  for (int ix = 0; ix < map.nx; ++ix) {
    for (int iy = 0; iy < map.ny; ++iy) {
      const auto p = map.sample_position(ix, iy);
      const auto i = static_cast<std::size_t>(ix) * map.ny + iy;
      csv.row({p.x, p.y, map.values[i], map.valid[i] ? 1.0 : 0.0});
    }
  }
  return csv.text();
}

json bands_summary(const BandStructure& bands) {
  json out = {{"guided_band", bands.guided_band},
              {"n_bands", bands.n_bands()},
              {"n_k", bands.k.size()},
              {"ng_cap", bands.ng_cap}};
  out["band_edge_wavelength_nm"] =
      bands.band_edge_wavelength_nm ? json(*bands.band_edge_wavelength_nm) : json(nullptr);
  json guided = json::array();
  if (bands.guided_band >= 0 && bands.k.size() >= 3) {
    for (std::size_t i = 0; i < bands.k.size(); ++i) {
      const auto ng = tabulated_group_index(bands, bands.guided_band, i);
      guided.push_back({{"k", bands.k[i]},
                        {"omega", bands.omega[bands.guided_band][i]},
                        {"wavelength_nm", bands.wavelength_nm(bands.guided_band, i)},
                        {"n_g", ng.value},
                        {"saturated", ng.saturated}});
    }
  }
  out["guided"] = guided;
  return out;
}

json position_report(const PipelineConfig& config, const ModeField& field, double n_g,
                     int threads) {
  const auto& g = config.geometry;
  const auto& pc = config.purcell;
  json rows = json::array();
  std::uint64_t stream = kBandStream;
  for (const auto& pos : pc.positions) {
    json row = {{"position", point_json(pos)}};
    const auto prox = surface_proximity(pos, g);
    row["surface_distance_nm"] = prox.distance_nm;
    row["yield_class"] = to_string(prox.yield);
    if (prox.inside_hole) {
      row["error"] = "position lies inside an air hole";
      rows.push_back(row);
      stream += 3;
      continue;
    }
    const double fy = purcell_factor(field, n_g, {pos, {0.0, 1.0}}, g, pc.options);
    const double fx = purcell_factor(field, n_g, {pos, {1.0, 0.0}}, g, pc.options);
    row["F_P_y"] = fy;
    row["F_P_x"] = fx;
    row["normalized_rate_y"] = fy / n_g;
    row["normalized_rate_x"] = fx / n_g;
    const auto br = branching_ratio(field, pos, n_g);
    row["branching"] = {{"kind", to_string(br.kind)}, {"value", br.value}};
    const auto seed = config.simulation.seed;
    const auto avg = averaged_branching_ratio(field, pos, pc.sigma_nm, pc.samples,
                                              substream_seed(seed, stream), g);
    row["branching_averaged"] = {{"kind", to_string(avg.kind)}, {"value", avg.value}};
    json bands_json = json::object();
    const std::pair<const char*, Point2> orientations[] = {{"y", {0.0, 1.0}}, {"x", {1.0, 0.0}}};
    int o = 1;
    for (const auto& [name, dir] : orientations) {
      try {
        const auto band = uncertainty_band(field, n_g, pos, pc.sigma_nm, dir, pc.samples,
                                           substream_seed(seed, stream + o), g, pc.options, threads);
        bands_json[name] = {{"position", point_json(pos)},
                            {"sigma_nm", band.sigma_nm},
                            {"p16", band.percentile_low},
                            {"p84", band.percentile_high},
                            {"nominal", band.nominal_value},
                            {"rejection_fraction", band.rejection_fraction},
                            {"n_samples", band.samples},
                            {"seed", band.seed}};
      } catch (const ValidationError& e) {
        bands_json[name] = {{"error", e.what()}};
      }
      ++o;
    }
    row["uncertainty"] = bands_json;
    rows.push_back(row);
    stream += 3;
  }
  return rows;
}

PipelineSummary run_pipeline(const PipelineConfig& config, const fs::path& out_dir, int threads,
                             const Logger& log) {
  PipelineSummary summary;
  note(log, "solving bands");
  const auto solved = solve_waveguide(config, threads);
  const auto& bands = solved.bands;
  if (!bands.band_edge_wavelength_nm) {
    throw ValidationError("pipeline needs k = 0.5 among the samples");
  }
  summary.band_edge_wavelength_nm = *bands.band_edge_wavelength_nm;
  io::write_file_atomic(out_dir / "bands.csv", bands_csv(bands));
  io::write_file_atomic(out_dir / "bands.json", io::to_json_text(bands_summary(bands)));

  note(log, "computing reference mode");
  summary.reference_k = reference_k(config, bands);
  const ModeField field = mode_field(solved.map, bands, bands.guided_band, summary.reference_k);
  summary.reference_n_g = group_index(bands, bands.guided_band, summary.reference_k).value;
  io::write_file_atomic(out_dir / "field.csv", field_csv(field));

  note(log, "evaluating Purcell factors");
  const auto& pc = config.purcell;
  const PurcellMap map =
      purcell_map(field, summary.reference_n_g, pc.orientation, config.geometry, pc.options);
  io::write_file_atomic(out_dir / "purcell_map.csv", purcell_map_csv(map));
  const json positions = position_report(config, field, summary.reference_n_g, threads);
  io::write_file_atomic(out_dir / "positions.json",
                        io::to_json_text({{"reference_k", summary.reference_k},
                                          {"reference_n_g", summary.reference_n_g},
                                          {"positions", positions}}));

  const NgModel ngm = ng_model(bands, config.calibration_offset_nm);
  io::CsvWriter table({"group", "qd", "delta_lambda_nm", "n_g", "gamma_true", "gamma_ns_inv",
                       "sigma", "qe_true", "qe_fit"});
  std::uint64_t hist_index = 0;
  json groups_json = json::array();
  for (std::size_t gi = 0; gi < config.groups.size(); ++gi) {
    const auto& group = config.groups[gi];
    note(log, "simulating group " + group.label);
    GroupOutcome outcome;
    outcome.label = group.label;
    outcome.position = group.position;
    const double n1 = 1.0;
    outcome.coupling_x =
        purcell_factor(field, n1, {group.position, {1.0, 0.0}}, config.geometry, pc.options);
    outcome.coupling_y =
        purcell_factor(field, n1, {group.position, {0.0, 1.0}}, config.geometry, pc.options);
    const std::string stem = file_label(group.label);
    for (std::size_t q = 0; q < group.qds.size(); ++q) {
      const auto& qd = group.qds[q];
      for (std::size_t d = 0; d < qd.detunings_nm.size(); ++d) {
        const double dl = qd.detunings_nm[d];
        const double ng = ngm(dl);
        ExcitonSystem system;
        system.x = {waveguide_radiative_rate(outcome.coupling_x, ng, config.gamma_bulk_r),
                    qd.gamma_nr, config.exciton.gamma_bd, config.exciton.gamma_db};
        system.y = {waveguide_radiative_rate(outcome.coupling_y, ng, config.gamma_bulk_r),
                    qd.gamma_nr, config.exciton.gamma_bd, config.exciton.gamma_db};
        system.gamma_d_nr = config.exciton.gamma_d_nr;
        system.initial_populations = config.exciton.initial_populations;

        TcspcSettings sim = config.simulation;
        sim.seed = substream_seed(config.simulation.seed, kHistogramStream + hist_index++);
        const DecayHistogram hist = simulate_histogram(to_decay_model(system), sim);
        const std::string name =
            stem + "_qd" + std::to_string(q) + "_" + std::to_string(d);
        io::write_histogram(out_dir / "histograms" / (name + ".csv"), hist);

        const HistogramData data = HistogramData::observed(hist);
        const double t_start = config.fit.t_start_ns ? *config.fit.t_start_ns : default_fit_start(data);
        const FitResult fit = fit_single_exp(data, t_start, config.fit.options);
        io::write_file_atomic(out_dir / "fits" / (name + ".json"), io::to_json_text(io::to_json(fit)));

        // Brightness-weighted rates of the two dipoles stand in for the true Gamma.
        const double wx = system.x.gamma_b_r * system.initial_populations[0];
        const double wy = system.y.gamma_b_r * system.initial_populations[1];
        const double gx = system.x.gamma_b_r + system.x.gamma_b_nr;
        const double gy = system.y.gamma_b_r + system.y.gamma_b_nr;
        const double g_true = (wx * gx + wy * gy) / (wx + wy);
        const double r_true = (wx * system.x.gamma_b_r + wy * system.y.gamma_b_r) / (wx + wy);
        outcome.true_gamma.push_back(g_true);
        outcome.true_qe.push_back(r_true / g_true);
        outcome.points.push_back({dl, fit.value("gamma"), fit.error("gamma"), ng, static_cast<int>(q)});
      }
    }
    note(log, "global fit for group " + group.label);
    outcome.fit = global_fit({group.label, outcome.points}, config.gamma_bulk_r);
    for (std::size_t i = 0; i < outcome.points.size(); ++i) {
      const auto& p = outcome.points[i];
      table.row({static_cast<double>(gi), static_cast<double>(p.qd), p.delta_lambda_nm, p.n_g,
                 outcome.true_gamma[i], p.gamma, p.sigma, outcome.true_qe[i],
                 outcome.fit.quantum_efficiency[i]});
    }
    json gj = io::to_json(outcome.fit, outcome.points);
    gj["label"] = group.label;
    gj["position"] = point_json(group.position);
    gj["coupling_true_x"] = outcome.coupling_x;
    gj["coupling_true_y"] = outcome.coupling_y;
    io::write_file_atomic(out_dir / ("global_fit_" + stem + ".json"), io::to_json_text(gj));
    groups_json.push_back({{"label", group.label},
                           {"coupling_fit", outcome.fit.coupling},
                           {"coupling_true_y", outcome.coupling_y},
                           {"coupling_true_x", outcome.coupling_x},
                           {"qe_fit", outcome.fit.quantum_efficiency},
                           {"qe_true", outcome.true_qe},
                           {"n_g", [&] {
                              json a = json::array();
                              for (const auto& p : outcome.points) a.push_back(p.n_g);
                              return a;
                            }()}});
    summary.groups.push_back(std::move(outcome));
  }
  io::write_file_atomic(out_dir / "tuning_points.csv", table.text());
  io::write_file_atomic(out_dir / "summary.json",
                        io::to_json_text({{"band_edge_wavelength_nm", summary.band_edge_wavelength_nm},
                                          {"reference_k", summary.reference_k},
                                          {"reference_n_g", summary.reference_n_g},
                                          {"seed", config.simulation.seed},
                                          {"groups", groups_json}}));
  note(log, "pipeline finished");
  return summary;
}

} // namespace slowlight
