#pragma once

#include <string>

#include "slowlight/geometry.hpp"
#include "slowlight/phc_bands.hpp"

namespace slowlight {

struct DesignSpec {
  double target_wavelength_nm = 915.0;
  double max_detuning_nm = 10.0;
  double a_min_nm = 233.0;
  double a_max_nm = 247.0;
  double r_min_nm = 71.0;
  double r_max_nm = 76.0;
  /// Grid pitch of the coarse (a, r) search.
  double grid_step_nm = 1.0;
  double n_eff = 2.87;
  int supercell_rows = 7;

  void validate() const;
};

struct DesignSettings {
  int resolution = 32;
  SolverSettings solver;
  /// Samples of r/a used by the edge-wavelength surrogate.
  int surrogate_samples = 5;
  /// Grid candidates re-solved exactly before refinement.
  int verified_candidates = 3;
  int max_bisections = 30;
};

struct DesignResult {
  PhcGeometry geometry;
  double band_edge_wavelength_nm = 0.0;
  /// band edge - target; >= 0 keeps the emitter on the slow-light side.
  double detuning_nm = 0.0;
  int band_solves = 0;
};

/// Band-edge wavelength of the guided band for one geometry (solves at
/// the identification k and at the zone edge).
double band_edge_wavelength(const PhcGeometry& geometry, const DesignSettings& settings);

/// Chooses (a, r) so that the band edge sits 0..max_detuning nm above the
/// target. Throws ValidationError naming the nearest achievable edge when
/// the ranges cannot reach the target.
DesignResult design_geometry(const DesignSpec& spec, const DesignSettings& settings = {});

enum class YieldClass { High, Low };

struct Proximity {
  double distance_nm = 0.0; // negative inside a hole
  YieldClass yield = YieldClass::Low;
  bool inside_hole = false;
};

/// Distance from the emitter to the nearest hole edge; yield is High above
/// 100 nm.
Proximity surface_proximity(Point2 position, const PhcGeometry& geometry);

std::string to_string(YieldClass yield);

} // namespace slowlight
