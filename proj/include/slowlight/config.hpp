#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "slowlight/design.hpp"
#include "slowlight/fitkit.hpp"
#include "slowlight/geometry.hpp"
#include "slowlight/phc_bands.hpp"
#include "slowlight/purcell.hpp"
#include "slowlight/tcspc.hpp"

namespace slowlight {

struct SolverConfig {
  int resolution = 32;
  SolverSettings settings;
  double k_min = 0.3;
  int n_uniform = 32;
  int n_tail = 8;
  double tail_width = 0.025;

  std::vector<double> k_samples() const {
    return default_k_samples(k_min, n_uniform, n_tail, tail_width);
  }
};

struct PurcellConfig {
  PurcellOptions options;
  /// Wavevector of the reference mode; unset picks the last sample before
  /// the zone edge (slow-light limit).
  std::optional<double> reference_k;
  double sigma_nm = 33.0;
  int samples = 10000;
  Point2 orientation{0.0, 1.0};
  std::vector<Point2> positions = default_designated_positions();
};

struct ExcitonConfig {
  double gamma_bd = 0.0;
  double gamma_db = 0.0;
  double gamma_d_nr = 0.0;
  std::array<double, 4> initial_populations{0.5, 0.5, 0.0, 0.0};
};

struct QdConfig {
  double gamma_nr = 0.0;
  std::vector<double> detunings_nm;
};

struct GroupConfig {
  std::string label;
  Point2 position;
  std::vector<QdConfig> qds;
};

struct FitConfig {
  FitOptions options;
  std::optional<double> t_start_ns;
};

struct PipelineConfig {
  PhcGeometry geometry;
  SolverConfig solver;
  PurcellConfig purcell;
  double gamma_bulk_r = 1.0;
  double calibration_offset_nm = 0.0;
  ExcitonConfig exciton;
  std::vector<GroupConfig> groups;
  TcspcSettings simulation;
  FitConfig fit;
  DesignSpec design;
  std::string output_dir = "out";
};

/// JSON schema the configuration is validated against.
const nlohmann::json& config_schema();

/// Violations of a JSON-schema subset (type, properties, required,
/// additionalProperties, items, minItems, maxItems, minimum, maximum,
/// exclusiveMinimum, exclusiveMaximum, enum, local $ref), each prefixed
/// with the JSON pointer of the offending value.
std::vector<std::string> schema_errors(const nlohmann::json& instance, const nlohmann::json& schema);

/// Validates against the schema, then fills defaults. Throws ValidationError
/// listing every violation.
PipelineConfig parse_config(const nlohmann::json& json);
PipelineConfig load_config(const std::filesystem::path& path);

} // namespace slowlight
