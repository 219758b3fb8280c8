#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slowlight/config.hpp"
#include "slowlight/fitkit.hpp"
#include "slowlight/phc_bands.hpp"

namespace slowlight {

using Logger = std::function<void(const std::string&)>;

struct SolvedWaveguide {
  DielectricMap map;
  BandStructure bands;
};

SolvedWaveguide solve_waveguide(const PipelineConfig& config, int threads);

/// Reference wavevector for fields and Purcell factors.
double reference_k(const PipelineConfig& config, const BandStructure& bands);

/// Band table: k, band_index, omega, n_g.
std::string bands_csv(const BandStructure& bands);
/// Field table: x, y, re_ex, im_ex, re_ey, im_ey (units of a).
std::string field_csv(const ModeField& field);
/// Purcell map table: x, y, F_P, valid.
std::string purcell_map_csv(const PurcellMap& map);

nlohmann::json bands_summary(const BandStructure& bands);

/// Per-position F_P, normalized rates, branching ratios, uncertainty bands
/// and surface proximity for the configured positions.
nlohmann::json position_report(const PipelineConfig& config, const ModeField& field, double n_g,
                               int threads);

struct GroupOutcome {
  std::string label;
  Point2 position;
  double coupling_x = 0.0; // F_P / n_g of an x dipole
  double coupling_y = 0.0;
  std::vector<TuningPoint> points;
  std::vector<double> true_gamma;
  std::vector<double> true_qe;
  LinearFit fit;
};

struct PipelineSummary {
  double band_edge_wavelength_nm = 0.0;
  double reference_k = 0.0;
  double reference_n_g = 0.0;
  std::vector<GroupOutcome> groups;
};

/// bands -> modes -> purcell -> simulate -> fit -> global fit. Every file is
/// written atomically under out_dir; the output depends only on the config.
PipelineSummary run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir,
                             int threads, const Logger& log = {});

} // namespace slowlight
