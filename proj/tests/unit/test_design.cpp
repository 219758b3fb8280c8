#include <doctest.h>

#include <string>

#include "slowlight/design.hpp"
#include "slowlight/error.hpp"

using namespace slowlight;

namespace {

DesignSettings small_settings() {
  DesignSettings s;
  s.resolution = 32;
  s.solver.cutoff = 4.0;
  return s;
}

DesignSpec small_spec() {
  DesignSpec spec;
  spec.supercell_rows = 4;
  return spec;
}

PhcGeometry geometry_of(const DesignSpec& spec, double a, double r) {
  PhcGeometry g;
  g.lattice_constant_nm = a;
  g.hole_radius_nm = r;
  g.n_eff = spec.n_eff;
  g.supercell_rows = spec.supercell_rows;
  return g;
}

} // namespace

TEST_CASE("design spec validation") {
  DesignSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.target_wavelength_nm = 700.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.r_max_nm = 130.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.a_min_nm = 250.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("band edge grows with the lattice constant and falls with the radius") {
  const auto settings = small_settings();
  const auto spec = small_spec();
  const double base = band_edge_wavelength(geometry_of(spec, 240.0, 74.0), settings);
  CHECK(band_edge_wavelength(geometry_of(spec, 245.0, 74.0), settings) > base);
  CHECK(band_edge_wavelength(geometry_of(spec, 240.0, 76.0), settings) < base);
}

TEST_CASE("designed geometry re-solves to the reported detuning") {
  const auto settings = small_settings();
  auto spec = small_spec();
  const double lo = band_edge_wavelength(geometry_of(spec, spec.a_min_nm, spec.r_max_nm), settings);
  const double hi = band_edge_wavelength(geometry_of(spec, spec.a_max_nm, spec.r_min_nm), settings);
  REQUIRE(hi > lo);
  spec.target_wavelength_nm = 0.5 * (lo + hi);
  spec.max_detuning_nm = 4.0;
  const auto result = design_geometry(spec, settings);
  CHECK(result.detuning_nm >= 0.0);
  CHECK(result.detuning_nm <= spec.max_detuning_nm);
  const double again = band_edge_wavelength(result.geometry, settings);
  CHECK(again == doctest::Approx(result.band_edge_wavelength_nm).epsilon(1e-12));
  CHECK(result.detuning_nm == doctest::Approx(again - spec.target_wavelength_nm).epsilon(1e-12));
  CHECK(result.geometry.lattice_constant_nm >= spec.a_min_nm);
  CHECK(result.geometry.lattice_constant_nm <= spec.a_max_nm);
  CHECK(result.geometry.hole_radius_nm >= spec.r_min_nm);
  CHECK(result.geometry.hole_radius_nm <= spec.r_max_nm);
  CHECK(result.band_solves > 0);
}

TEST_CASE("unreachable targets name the nearest achievable edge") {
  const auto settings = small_settings();
  auto spec = small_spec();
  const double hi = band_edge_wavelength(geometry_of(spec, spec.a_max_nm, spec.r_min_nm), settings);
  spec.target_wavelength_nm = std::min(1000.0, hi + 60.0);
  try {
    design_geometry(spec, settings);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("nearest") != std::string::npos);
  }
}
