#include "slowlight/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "slowlight/error.hpp"

namespace slowlight {

void PhcGeometry::validate() const {
  auto fail = [](const std::string& what) { throw GeometryError("geometry: " + what); };
  if (!(lattice_constant_nm > 0.0) || !std::isfinite(lattice_constant_nm)) {
    fail("lattice constant a must be > 0");
  }
  if (!(hole_radius_nm >= 0.0) || !std::isfinite(hole_radius_nm)) {
    fail("hole radius r must be >= 0");
  }
  if (!(hole_radius_nm < 0.5 * lattice_constant_nm)) {
    std::ostringstream msg;
    msg << "hole radius r (" << hole_radius_nm << " nm) must be < a/2 ("
        << 0.5 * lattice_constant_nm << " nm); holes would overlap";
    fail(msg.str());
  }
  if (!(n_eff > 1.0) || !std::isfinite(n_eff)) {
    fail("background index n_eff must be > 1");
  }
  if (supercell_rows < 4) {
    fail("supercell_rows must be >= 4");
  }
}

double row_offset(int row) { return (std::abs(row) % 2 == 1) ? 0.0 : 0.5; }

std::vector<Point2> PhcGeometry::hole_positions() const {
  std::vector<Point2> holes;
  if (hole_radius_nm <= 0.0) {
    return holes;
  }
  for (int j = -supercell_rows - 1; j <= supercell_rows; ++j) {
    if (j == 0 && line_defect) {
      continue;
    }
    holes.push_back({row_offset(j), j * kRowPitch});
  }
  return holes;
}

PhcGeometry PhcGeometry::scaled(double s) const {
  PhcGeometry g = *this;
  g.lattice_constant_nm *= s;
  g.hole_radius_nm *= s;
  return g;
}

double nearest_hole_distance(const PhcGeometry& geometry, Point2 p) {
  const double r = geometry.radius();
  if (r <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  const int centre_row = static_cast<int>(std::lround(p.y / kRowPitch));
  double best = std::numeric_limits<double>::infinity();
  for (int j = centre_row - 2; j <= centre_row + 2; ++j) {
    if (j == 0 && geometry.line_defect) {
      continue;
    }
    const double off = row_offset(j);
    const double xc = off + std::round(p.x - off);
    const double yc = j * kRowPitch;
    for (int shift = -1; shift <= 1; ++shift) {
      const double d = std::hypot(p.x - (xc + shift), p.y - yc) - r;
      best = std::min(best, d);
    }
  }
  return best;
}

bool inside_hole(const PhcGeometry& geometry, Point2 p) {
  return nearest_hole_distance(geometry, p) < 0.0;
}

} // namespace slowlight
