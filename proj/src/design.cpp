#include "slowlight/design.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "pchip.hpp"

#include "slowlight/error.hpp"

namespace slowlight {

void DesignSpec::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("design: " + what); };
  if (!(target_wavelength_nm >= 850.0 && target_wavelength_nm <= 1000.0)) {
    fail("target wavelength must lie within 850-1000 nm");
  }
  if (!(max_detuning_nm > 0.0)) {
    fail("max detuning must be > 0");
  }
  if (!(a_min_nm > 0.0 && a_min_nm <= a_max_nm)) {
    fail("lattice-constant range must be non-empty and positive");
  }
  if (!(r_min_nm > 0.0 && r_min_nm <= r_max_nm)) {
    fail("radius range must be non-empty and positive");
  }
  if (!(r_max_nm < 0.5 * a_min_nm)) {
    fail("radius range reaches a/2 for the smallest lattice constant; holes would overlap");
  }
  if (!(grid_step_nm > 0.0)) {
    fail("grid step must be > 0");
  }
}

double band_edge_wavelength(const PhcGeometry& geometry, const DesignSettings& settings) {
  geometry.validate();
  const auto map = build_supercell(geometry, settings.resolution);
  const std::array<double, 2> ks{settings.solver.identification_k, 0.5};
  const auto bands = solve_bands(map, ks, settings.solver.n_bands, settings.solver);
  return *bands.band_edge_wavelength_nm;
}

namespace {

class EdgeCache {
public:
  EdgeCache(const DesignSpec& spec, const DesignSettings& settings)
      : spec_(spec), settings_(settings) {}

  double operator()(double a, double r) {
    const auto key = std::make_pair(a, r);
    if (auto it = cache_.find(key); it != cache_.end()) {
      return it->second;
    }
    PhcGeometry g;
    g.lattice_constant_nm = a;
    g.hole_radius_nm = r;
    g.n_eff = spec_.n_eff;
    g.supercell_rows = spec_.supercell_rows;
    const double edge = band_edge_wavelength(g, settings_);
    ++solves;
    cache_.emplace(key, edge);
    return edge;
  }

  int solves = 0;

private:
  const DesignSpec& spec_;
  const DesignSettings& settings_;
  std::map<std::pair<double, double>, double> cache_;
};

// Distance of a detuning from the accepted window [0, max].
double miss(double detuning, double max_detuning) {
  if (detuning < 0.0) {
    return -detuning;
  }
  return std::max(0.0, detuning - max_detuning);
}

struct Candidate {
  double a;
  double r;
  double predicted;
};

} // namespace

DesignResult design_geometry(const DesignSpec& spec, const DesignSettings& settings) {
  spec.validate();
  if (settings.surrogate_samples < 4) {
    throw ValidationError("design: surrogate needs at least 4 samples");
  }
  EdgeCache edge(spec, settings);
  const double target = spec.target_wavelength_nm;

  // The edge scales with a at fixed r/a, so lambda_edge = a * f(r/a) and one
  // curve f covers the whole (a, r) rectangle.
  const double rho_lo = spec.r_min_nm / spec.a_max_nm;
  const double rho_hi = spec.r_max_nm / spec.a_min_nm;
  std::vector<double> rho(settings.surrogate_samples);
  std::vector<double> f(settings.surrogate_samples);
  for (int i = 0; i < settings.surrogate_samples; ++i) {
    rho[i] = rho_lo + (rho_hi - rho_lo) * i / (settings.surrogate_samples - 1);
    f[i] = edge(spec.a_min_nm, rho[i] * spec.a_min_nm) / spec.a_min_nm;
  }
  const boost::math::interpolators::pchip<std::vector<double>> surrogate(std::move(rho),
                                                                         std::move(f));

  std::vector<Candidate> grid;
  const int na = static_cast<int>(std::floor((spec.a_max_nm - spec.a_min_nm) / spec.grid_step_nm + 1e-9));
  const int nr = static_cast<int>(std::floor((spec.r_max_nm - spec.r_min_nm) / spec.grid_step_nm + 1e-9));
  for (int i = 0; i <= na; ++i) {
    const double a = spec.a_min_nm + i * spec.grid_step_nm;
    for (int j = 0; j <= nr; ++j) {
      const double r = spec.r_min_nm + j * spec.grid_step_nm;
      grid.push_back({a, r, a * surrogate(r / a)});
    }
  }
  auto score = [&](double lambda) {
    const double d = lambda - target;
    return std::make_pair(miss(d, spec.max_detuning_nm), std::abs(d));
  };
  std::stable_sort(grid.begin(), grid.end(), [&](const Candidate& x, const Candidate& y) {
    return score(x.predicted) < score(y.predicted);
  });

  DesignResult best;
  bool have = false;
  const int n_verify = std::min<int>(settings.verified_candidates, static_cast<int>(grid.size()));
  for (int i = 0; i < n_verify; ++i) {
    const double lambda = edge(grid[i].a, grid[i].r);
    if (!have || score(lambda) < score(best.band_edge_wavelength_nm)) {
      best.geometry.lattice_constant_nm = grid[i].a;
      best.geometry.hole_radius_nm = grid[i].r;
      best.band_edge_wavelength_nm = lambda;
      have = true;
    }
  }

  if (score(best.band_edge_wavelength_nm).first > 0.0) {
    // Bisection on a at the chosen r, aiming at the middle of the window.
    const double r = best.geometry.hole_radius_nm;
    const double goal = target + 0.5 * spec.max_detuning_nm;
    double lo = std::max(spec.a_min_nm, 2.0 * r * (1.0 + 1e-9));
    double hi = spec.a_max_nm;
    const double e_lo = edge(lo, r);
    const double e_hi = edge(hi, r);
    if (goal < e_lo || goal > e_hi) {
      const bool below = goal < e_lo;
      const double nearest = below ? e_lo : e_hi;
      std::ostringstream msg;
      msg << "design: target " << target << " nm is unreachable within the ranges; nearest "
          << "achievable band edge is " << nearest << " nm (a = " << (below ? lo : hi)
          << " nm, r = " << r << " nm)";
      throw ValidationError(msg.str());
    }
    for (int it = 0; it < settings.max_bisections; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double lambda = edge(mid, r);
      if (score(lambda) < score(best.band_edge_wavelength_nm)) {
        best.geometry.lattice_constant_nm = mid;
        best.band_edge_wavelength_nm = lambda;
      }
      if (score(lambda).first == 0.0) {
        break;
      }
      (lambda < goal ? lo : hi) = mid;
    }
    if (score(best.band_edge_wavelength_nm).first > 0.0) {
      std::ostringstream msg;
      msg << "design: bisection did not place the band edge within " << spec.max_detuning_nm
          << " nm of " << target << " nm; nearest achievable edge is "
          << best.band_edge_wavelength_nm << " nm";
      throw ValidationError(msg.str());
    }
  }

  best.geometry.n_eff = spec.n_eff;
  best.geometry.supercell_rows = spec.supercell_rows;
  best.detuning_nm = best.band_edge_wavelength_nm - target;
  best.band_solves = edge.solves;
  return best;
}

Proximity surface_proximity(Point2 position, const PhcGeometry& geometry) {
  geometry.validate();
  Proximity p;
  p.distance_nm = nearest_hole_distance(geometry, position) * geometry.lattice_constant_nm;
  p.inside_hole = p.distance_nm < 0.0;
  p.yield = p.distance_nm > 100.0 ? YieldClass::High : YieldClass::Low;
  return p;
}

std::string to_string(YieldClass yield) { return yield == YieldClass::High ? "high" : "low"; }

} // namespace slowlight
