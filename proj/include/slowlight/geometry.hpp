#pragma once

#include <vector>

namespace slowlight {

/// In-plane point. Unless stated otherwise, coordinates are in units of the
/// lattice constant with the waveguide axis along x at y = 0.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr double kRowPitch = 0.86602540378443864676; // sqrt(3)/2

/// W1 waveguide in a triangular lattice of air holes: one row of holes
/// removed along x. Row j sits at y = j*sqrt(3)/2; odd rows carry holes at
/// integer x, even rows at half-integer x, so the rows flanking the defect
/// have holes at x = 0.
struct PhcGeometry {
  double lattice_constant_nm = 240.0;
  double hole_radius_nm = 74.0;
  double n_eff = 2.87;
  int supercell_rows = 7;
  bool line_defect = true;

  /// Throws GeometryError naming the violated invariant.
  void validate() const;

  double radius() const { return hole_radius_nm / lattice_constant_nm; }
  double permittivity() const { return n_eff * n_eff; }

  /// Supercell height in units of a. Rows -R-1..R are kept; row -R-1 is
  /// shared with the neighbouring supercell.
  double supercell_height() const { return (2.0 * supercell_rows + 2.0) * kRowPitch; }

  /// Hole centres of one supercell, x in [0, 1), y in [-H/2, H/2).
  std::vector<Point2> hole_positions() const;

  PhcGeometry scaled(double s) const;
};

/// x offset of the holes in row j.
double row_offset(int row);

/// Signed distance (units of a) from p to the nearest hole edge of the
/// infinite single-defect lattice; negative inside a hole.
double nearest_hole_distance(const PhcGeometry& geometry, Point2 p);

bool inside_hole(const PhcGeometry& geometry, Point2 p);

} // namespace slowlight
