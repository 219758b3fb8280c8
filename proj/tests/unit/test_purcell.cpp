#include <doctest.h>

#include <cmath>
#include <numbers>

#include "slowlight/error.hpp"
#include "slowlight/purcell.hpp"

using namespace slowlight;

namespace {

struct Fixture {
  PhcGeometry geometry;
  ModeField field;

  explicit Fixture(double scale = 1.0) {
    geometry.supercell_rows = 4;
    geometry = geometry.scaled(scale);
    SolverSettings settings;
    settings.cutoff = 4.0;
    const auto map = build_supercell(geometry, 32);
    const std::vector<double> ks{0.44, 0.45, 0.46, 0.5};
    const auto bands = solve_bands(map, ks, 0, settings);
    field = mode_field(map, bands, bands.guided_band, 0.46);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

} // namespace

TEST_CASE("Purcell factor matches the closed-form expression") {
  const auto& f = fixture();
  const Point2 p{0.37, 0.21};
  const auto e = f.field.at(p);
  const double u = f.field.omega;
  const double h = PurcellOptions{}.mode_height;
  const double expected =
      3.0 * 20.0 * std::norm(e[1]) / (4.0 * std::numbers::pi * u * u * f.geometry.n_eff * h);
  CHECK(purcell_factor(f.field, 20.0, {p, {0.0, 1.0}}, f.geometry) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Purcell factor is linear in n_g and quadratic in the dipole projection") {
  const auto& f = fixture();
  const Point2 p{0.31, 0.42};
  const double fx = purcell_factor(f.field, 10.0, {p, {1.0, 0.0}}, f.geometry);
  const double fy = purcell_factor(f.field, 10.0, {p, {0.0, 1.0}}, f.geometry);
  const double c = std::sqrt(0.5);
  const double fp = purcell_factor(f.field, 10.0, {p, {c, c}}, f.geometry);
  const double fm = purcell_factor(f.field, 10.0, {p, {c, -c}}, f.geometry);
  CHECK(fp + fm == doctest::Approx(fx + fy).epsilon(1e-12));
  CHECK(purcell_factor(f.field, 30.0, {p, {0.0, 1.0}}, f.geometry) == doctest::Approx(3.0 * fy));
  CHECK(purcell_factor(f.field, 0.0, {p, {0.0, 1.0}}, f.geometry) == 0.0);
}

TEST_CASE("Purcell factor is invariant under lattice scaling") {
  const auto& f = fixture();
  const Fixture twice(2.0);
  for (const auto& p : default_designated_positions()) {
    const double a = purcell_factor(f.field, 15.0, {p, {0.0, 1.0}}, f.geometry);
    const double b = purcell_factor(twice.field, 15.0, {p, {0.0, 1.0}}, twice.geometry);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }
}

TEST_CASE("Purcell factor input checks") {
  const auto& f = fixture();
  CHECK_THROWS_AS(purcell_factor(f.field, 10.0, {{0.0, kRowPitch}, {0.0, 1.0}}, f.geometry),
                  GeometryError);
  CHECK_THROWS_AS(purcell_factor(f.field, 10.0, {{0.5, 0.0}, {1.0, 1.0}}, f.geometry),
                  ValidationError);
  CHECK_THROWS_AS(purcell_factor(f.field, -1.0, {{0.5, 0.0}, {0.0, 1.0}}, f.geometry),
                  ValidationError);
}

TEST_CASE("Purcell map marks holes invalid and peaks in the dielectric") {
  const auto& f = fixture();
  const auto map = purcell_map(f.field, 10.0, {0.0, 1.0}, f.geometry);
  std::size_t invalid = 0;
  for (int ix = 0; ix < map.nx; ++ix) {
    for (int iy = 0; iy < map.ny; ++iy) {
      const auto i = static_cast<std::size_t>(ix) * map.ny + iy;
      CHECK(map.valid[i] == !inside_hole(f.geometry, map.sample_position(ix, iy)));
      invalid += map.valid[i] ? 0 : 1;
    }
  }
  CHECK(invalid > 0);
  CHECK_FALSE(inside_hole(f.geometry, map.argmax()));
}

TEST_CASE("branching ratio classifies the mirror axis as y-dominant") {
  const auto& f = fixture();
  const auto axis = branching_ratio(f.field, {0.5, 0.0}, 10.0);
  CHECK(axis.kind == BranchingKind::YDominant);
  const Point2 p{0.3, 0.4};
  const auto off = branching_ratio(f.field, p, 10.0);
  REQUIRE(off.kind == BranchingKind::Ratio);
  const double fy = purcell_factor(f.field, 10.0, {p, {0.0, 1.0}}, f.geometry);
  const double fx = purcell_factor(f.field, 10.0, {p, {1.0, 0.0}}, f.geometry);
  CHECK(off.value == doctest::Approx(fy / fx).epsilon(1e-12));
  CHECK_THROWS_AS(branching_ratio(f.field, {0.0, kRowPitch}, 10.0), GeometryError);
  CHECK(to_string(BranchingKind::Node) == "node");
}

TEST_CASE("placement-averaged branching stays finite on the axis") {
  const auto& f = fixture();
  const auto avg = averaged_branching_ratio(f.field, {0.5, 0.0}, 33.0, 4000, 11, f.geometry);
  CHECK(avg.kind == BranchingKind::Ratio);
  CHECK(std::isfinite(avg.value));
  CHECK(avg.value > 0.0);
  const auto zero = averaged_branching_ratio(f.field, {0.3, 0.4}, 0.0, 100, 11, f.geometry);
  CHECK(zero.value == doctest::Approx(branching_ratio(f.field, {0.3, 0.4}, 1.0).value));
}

TEST_CASE("uncertainty band is seeded, thread-independent and brackets sensibly") {
  const auto& f = fixture();
  const Point2 nominal{0.5, 0.5};
  const auto one = uncertainty_band(f.field, 20.0, nominal, 33.0, {0.0, 1.0}, 5000, 42, f.geometry, {}, 1);
  const auto four = uncertainty_band(f.field, 20.0, nominal, 33.0, {0.0, 1.0}, 5000, 42, f.geometry, {}, 4);
  CHECK(one.percentile_low == four.percentile_low);
  CHECK(one.percentile_high == four.percentile_high);
  CHECK(one.rejection_fraction == four.rejection_fraction);
  CHECK(one.percentile_low <= one.percentile_high);
  CHECK(one.rejection_fraction > 0.0);
  CHECK(one.rejection_fraction < 0.9);
  const auto other = uncertainty_band(f.field, 20.0, nominal, 33.0, {0.0, 1.0}, 5000, 43, f.geometry);
  CHECK(other.percentile_high != one.percentile_high);

  const auto sharp = uncertainty_band(f.field, 20.0, nominal, 0.0, {0.0, 1.0}, 100, 1, f.geometry);
  CHECK(sharp.percentile_low == doctest::Approx(sharp.nominal_value));
  CHECK(sharp.percentile_high == doctest::Approx(sharp.nominal_value));
  CHECK(sharp.rejection_fraction == 0.0);

  CHECK_THROWS_AS(uncertainty_band(f.field, 20.0, nominal, 33.0, {0.0, 1.0}, 99, 1, f.geometry),
                  ValidationError);
  CHECK_THROWS_AS(uncertainty_band(f.field, 20.0, nominal, -1.0, {0.0, 1.0}, 100, 1, f.geometry),
                  ValidationError);
}

TEST_CASE("default designated positions") {
  const auto p = default_designated_positions();
  REQUIRE(p.size() == 7);
  CHECK(p[4].x == 0.5);
  CHECK(p[6].y == 1.3);
}
