#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "slowlight/design.hpp"
#include "slowlight/error.hpp"
#include "slowlight/geometry.hpp"
#include "slowlight/phc_bands.hpp"

using namespace slowlight;

TEST_CASE("geometry validation names the violated invariant") {
  PhcGeometry g;
  CHECK_NOTHROW(g.validate());
  g.hole_radius_nm = 120.0;
  try {
    g.validate();
    FAIL("expected GeometryError");
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("a/2") != std::string::npos);
  }
  g = {};
  g.n_eff = 1.0;
  CHECK_THROWS_AS(g.validate(), GeometryError);
  g = {};
  g.supercell_rows = 3;
  CHECK_THROWS_AS(g.validate(), GeometryError);
  g = {};
  g.lattice_constant_nm = -1.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
}

TEST_CASE("rows flanking the defect carry holes at integer x") {
  CHECK(row_offset(1) == 0.0);
  CHECK(row_offset(-1) == 0.0);
  CHECK(row_offset(2) == 0.5);
  CHECK(row_offset(-2) == 0.5);
  PhcGeometry g;
  const auto holes = g.hole_positions();
  CHECK(holes.size() == static_cast<std::size_t>(2 * g.supercell_rows + 1));
  for (const auto& h : holes) {
    CHECK(std::abs(h.y) > 0.5);
    CHECK(h.y >= -0.5 * g.supercell_height() - 1e-12);
    CHECK(h.y < 0.5 * g.supercell_height());
  }
}

TEST_CASE("nearest hole distance matches a brute-force scan") {
  PhcGeometry g;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  std::uniform_real_distribution<double> uy(-4.0, 4.0);
  for (int i = 0; i < 2000; ++i) {
    const Point2 p{ux(rng), uy(rng)};
    CHECK(nearest_hole_distance(g, p) == doctest::Approx(oracle::brute_force_hole_distance(g, p)).epsilon(1e-12));
  }
}

TEST_CASE("proximity reproduces the nominal emitter-to-surface distances") {
  PhcGeometry g;
  g.lattice_constant_nm = 247.0;
  g.hole_radius_nm = 76.0;
  CHECK(surface_proximity({0.5, 0.5}, g).distance_nm == doctest::Approx(77.1).epsilon(0.5 / 77.1));
  CHECK(surface_proximity({0.5, 0.8}, g).distance_nm == doctest::Approx(48.6).epsilon(0.5 / 48.6));
  CHECK(surface_proximity({0.5, 1.3}, g).distance_nm == doctest::Approx(30.7).epsilon(0.5 / 30.7));
  CHECK(surface_proximity({0.5, 0.0}, g).yield == YieldClass::High);
  CHECK(surface_proximity({0.5, 1.3}, g).yield == YieldClass::Low);
  const auto in = surface_proximity({0.0, kRowPitch}, g);
  CHECK(in.inside_hole);
  CHECK(in.distance_nm < 0.0);
  CHECK(to_string(YieldClass::High) == "high");
}

TEST_CASE("rasterized air fraction matches the analytic hole area") {
  PhcGeometry g;
  const auto map = build_supercell(g, 64);
  double air = 0.0;
  for (double e : map.eps) {
    air += (e == 1.0) ? 1.0 : 0.0;
  }
  air /= static_cast<double>(map.eps.size());
  const double r = g.radius();
  const double expected = (2 * g.supercell_rows + 1) * std::numbers::pi * r * r / g.supercell_height();
  CHECK(air == doctest::Approx(expected).epsilon(0.02));
  CHECK_THROWS_AS(build_supercell(g, 8), ValidationError);
}

TEST_CASE("scaling keeps r/a") {
  PhcGeometry g;
  const auto s = g.scaled(2.0);
  CHECK(s.lattice_constant_nm == 480.0);
  CHECK(s.radius() == doctest::Approx(g.radius()));
}
