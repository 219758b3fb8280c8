#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slowlight/geometry.hpp"
#include "slowlight/phc_bands.hpp"

namespace slowlight {

/// Point dipole in the slab plane. Position in units of a.
struct DipoleEmitter {
  Point2 position;
  Point2 orientation{0.0, 1.0};
  double emission_wavelength_nm = 915.0;
};

struct PurcellOptions {
  /// Out-of-plane extent (units of a) that converts the area-normalized 2D
  /// field into a volume-normalized one: |e_3D|^2 = |e_2D|^2 / height.
  double mode_height = 0.8;
};

/// F_P = 3 pi a c^2 / (omega^2 sqrt(eps)) * n_g * |d* . e|^2. In lattice units
/// this is 3 n_g |d* . e|^2 / (4 pi u^2 sqrt(eps) h) with u = omega a / 2 pi c.
/// Throws GeometryError when the emitter sits inside an air hole.
double purcell_factor(const ModeField& field, double n_g, const DipoleEmitter& emitter,
                      const PhcGeometry& geometry, const PurcellOptions& options = {});

struct PurcellMap {
  int nx = 0;
  int ny = 0;
  double height = 0.0;
  std::vector<double> values; // ix * ny + iy; 0 where invalid
  std::vector<bool> valid;    // false inside holes
  double wavelength_nm = 0.0;
  double n_g = 0.0;
  Point2 orientation;

  Point2 sample_position(int ix, int iy) const {
    return {static_cast<double>(ix) / nx, -0.5 * height + iy * height / ny};
  }
  /// Grid node holding the largest valid value.
  Point2 argmax() const;
};

PurcellMap purcell_map(const ModeField& field, double n_g, Point2 orientation,
                       const PhcGeometry& geometry, const PurcellOptions& options = {});

enum class BranchingKind { Ratio, YDominant, Node };

struct BranchingRatio {
  BranchingKind kind = BranchingKind::Ratio;
  double value = 0.0; // |e_y|^2 / |e_x|^2 when kind == Ratio
};

/// gamma_wg,r(y-dipole) / gamma_wg,r(x-dipole) at one position; independent of n_g.
BranchingRatio branching_ratio(const ModeField& field, Point2 position, double n_g);

std::string to_string(BranchingKind kind);

/// Ratio of |e_y|^2 to |e_x|^2, each averaged over Gaussian placement error
/// around the nominal point. Off-axis draws pick up e_x, so this stays finite
/// on the mirror axis where the point ratio is y-dominant.
BranchingRatio averaged_branching_ratio(const ModeField& field, Point2 nominal, double sigma_nm,
                                        int samples, std::uint64_t seed,
                                        const PhcGeometry& geometry);

struct UncertaintyBand {
  Point2 nominal;
  double sigma_nm = 0.0;
  int samples = 0;
  double nominal_value = 0.0;
  double percentile_low = 0.0;  // 16th
  double percentile_high = 0.0; // 84th
  double rejection_fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Normalized rate F_P / n_g under isotropic Gaussian placement error. Draws
/// inside holes are rejected. Samples are split into fixed chunks, each with
/// its own substream of the seed, so the result does not depend on threads.
UncertaintyBand uncertainty_band(const ModeField& field, double n_g, Point2 nominal,
                                 double sigma_nm, Point2 orientation, int samples,
                                 std::uint64_t seed, const PhcGeometry& geometry,
                                 const PurcellOptions& options = {}, int threads = 1);

/// The seven designated emitter sites (units of a).
std::vector<Point2> default_designated_positions();

} // namespace slowlight
