#include "slowlight/purcell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "slowlight/error.hpp"
#include "slowlight/random.hpp"

namespace slowlight {

namespace {

constexpr double kBranchingThreshold = 1e-12;
constexpr int kChunkSize = 1024;
constexpr double kMaxRejection = 0.9;

void check_orientation(Point2 d) {
  const double norm = std::hypot(d.x, d.y);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) {
    throw ValidationError("dipole orientation must be a unit vector");
  }
}

double prefactor(const ModeField& field, const PhcGeometry& geometry,
                 const PurcellOptions& options) {
  if (!(options.mode_height > 0.0)) {
    throw ValidationError("purcell: mode_height must be > 0");
  }
  const double u = field.omega;
  return 3.0 / (4.0 * std::numbers::pi * u * u * geometry.n_eff * options.mode_height);
}

double overlap(const std::array<std::complex<double>, 2>& e, Point2 d) {
  return std::norm(d.x * e[0] + d.y * e[1]);
}

double wrap_unit(double x) { return x - std::floor(x); }

double percentile(std::vector<double>& values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return values[lo] + t * (values[hi] - values[lo]);
}

struct ChunkDraws {
  std::vector<Point2> accepted;
  long attempts = 0;
};

// Draws `quota` in-dielectric positions around the nominal point from the
// chunk's own substream; gives up after quota / (1 - kMaxRejection) attempts.
ChunkDraws draw_chunk(Point2 nominal, double sigma, int quota, std::uint64_t seed, int chunk,
                      const PhcGeometry& geometry) {
  std::mt19937_64 rng(substream_seed(seed, static_cast<std::uint64_t>(chunk)));
  std::normal_distribution<double> normal(0.0, 1.0);
  ChunkDraws out;
  out.accepted.reserve(quota);
  const long limit = static_cast<long>(std::ceil(quota / (1.0 - kMaxRejection)));
  while (static_cast<int>(out.accepted.size()) < quota && out.attempts < limit) {
    const double dx = normal(rng);
    const double dy = normal(rng);
    ++out.attempts;
    const Point2 p{nominal.x + sigma * dx, nominal.y + sigma * dy};
    if (!inside_hole(geometry, p)) {
      out.accepted.push_back(p);
    }
  }
  return out;
}

std::vector<Point2> draw_positions(Point2 nominal, double sigma_nm, int samples,
                                   std::uint64_t seed, const PhcGeometry& geometry, int threads,
                                   double& rejection_fraction) {
  const double sigma = sigma_nm / geometry.lattice_constant_nm;
  const int chunks = (samples + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkDraws> results(chunks);
  auto work = [&](int c) {
    const int quota = std::min(kChunkSize, samples - c * kChunkSize);
    results[c] = draw_chunk(nominal, sigma, quota, seed, c, geometry);
  };
  const int n_threads = std::clamp(threads, 1, chunks);
  if (n_threads == 1) {
    for (int c = 0; c < chunks; ++c) {
      work(c);
    }
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (int c = t; c < chunks; c += n_threads) {
          work(c);
        }
      });
    }
  }
  std::vector<Point2> positions;
  positions.reserve(samples);
  long attempts = 0;
  for (const auto& r : results) {
    positions.insert(positions.end(), r.accepted.begin(), r.accepted.end());
    attempts += r.attempts;
  }
  rejection_fraction =
      1.0 - static_cast<double>(positions.size()) / static_cast<double>(attempts);
  if (static_cast<int>(positions.size()) < samples) {
    std::ostringstream msg;
    msg << "uncertainty band: more than " << kMaxRejection * 100
        << "% of draws land in air holes around (" << nominal.x << ", " << nominal.y
        << "); use a smaller sigma than " << sigma_nm << " nm";
    throw ValidationError(msg.str());
  }
  return positions;
}

} // namespace

double purcell_factor(const ModeField& field, double n_g, const DipoleEmitter& emitter,
                      const PhcGeometry& geometry, const PurcellOptions& options) {
  check_orientation(emitter.orientation);
  if (!(n_g >= 0.0) || !std::isfinite(n_g)) {
    throw ValidationError("purcell: n_g must be finite and >= 0");
  }
  if (inside_hole(geometry, emitter.position)) {
    std::ostringstream msg;
    msg << "purcell: emitter at (" << emitter.position.x << ", " << emitter.position.y
        << ") a lies inside an air hole";
    throw GeometryError(msg.str());
  }
  return prefactor(field, geometry, options) * n_g *
         overlap(field.at(emitter.position), emitter.orientation);
}

Point2 PurcellMap::argmax() const {
  double best = -1.0;
  Point2 where{};
  for (int ix = 0; ix < nx; ++ix) {
    for (int iy = 0; iy < ny; ++iy) {
      const auto i = static_cast<std::size_t>(ix) * ny + iy;
      if (valid[i] && values[i] > best) {
        best = values[i];
        where = sample_position(ix, iy);
      }
    }
  }
  return where;
}

PurcellMap purcell_map(const ModeField& field, double n_g, Point2 orientation,
                       const PhcGeometry& geometry, const PurcellOptions& options) {
  check_orientation(orientation);
  PurcellMap map;
  map.nx = field.nx;
  map.ny = field.ny;
  map.height = field.height;
  map.wavelength_nm = geometry.lattice_constant_nm / field.omega;
  map.n_g = n_g;
  map.orientation = orientation;
  map.values.assign(field.ex.size(), 0.0);
  map.valid.assign(field.ex.size(), false);
  for (int ix = 0; ix < field.nx; ++ix) {
    for (int iy = 0; iy < field.ny; ++iy) {
      const Point2 p = field.sample_position(ix, iy);
      if (inside_hole(geometry, p)) {
        continue;
      }
      const auto i = field.index(ix, iy);
      map.valid[i] = true;
      map.values[i] = purcell_factor(field, n_g, {p, orientation, map.wavelength_nm}, geometry,
                                     options);
    }
  }
  return map;
}

namespace {

BranchingRatio classify(double ex2, double ey2, double scale) {
  if (ex2 < kBranchingThreshold * scale && ey2 < kBranchingThreshold * scale) {
    return {BranchingKind::Node, 0.0};
  }
  if (ex2 < kBranchingThreshold * ey2) {
    return {BranchingKind::YDominant, std::numeric_limits<double>::infinity()};
  }
  return {BranchingKind::Ratio, ey2 / ex2};
}

double peak_intensity(const ModeField& field) {
  double peak = 0.0;
  for (std::size_t i = 0; i < field.ex.size(); ++i) {
    peak = std::max(peak, std::norm(field.ex[i]) + std::norm(field.ey[i]));
  }
  return peak;
}

} // namespace

BranchingRatio branching_ratio(const ModeField& field, Point2 position, double n_g) {
  if (!(n_g > 0.0)) {
    throw ValidationError("branching ratio: n_g must be > 0");
  }
  if (inside_hole(field.geometry, position)) {
    throw GeometryError("branching ratio: position lies inside an air hole");
  }
  // Both dipoles see the same n_g and prefactor, so the ratio is field-only.
  const auto e = field.at(position);
  return classify(std::norm(e[0]), std::norm(e[1]), peak_intensity(field));
}

BranchingRatio averaged_branching_ratio(const ModeField& field, Point2 nominal, double sigma_nm,
                                        int samples, std::uint64_t seed,
                                        const PhcGeometry& geometry) {
  if (!(sigma_nm >= 0.0) || samples < 1) {
    throw ValidationError("averaged branching ratio: need sigma >= 0 and samples >= 1");
  }
  double rejected = 0.0;
  const auto positions = draw_positions(nominal, sigma_nm, samples, seed, geometry, 1, rejected);
  double ex2 = 0.0;
  double ey2 = 0.0;
  for (const auto& p : positions) {
    const auto e = field.at(p);
    ex2 += std::norm(e[0]);
    ey2 += std::norm(e[1]);
  }
  const double n = static_cast<double>(positions.size());
  return classify(ex2 / n, ey2 / n, peak_intensity(field));
}

std::string to_string(BranchingKind kind) {
  switch (kind) {
  case BranchingKind::Ratio:
    return "ratio";
  case BranchingKind::YDominant:
    return "y-dominant";
  case BranchingKind::Node:
    return "node";
  }
  return "unknown";
}

UncertaintyBand uncertainty_band(const ModeField& field, double n_g, Point2 nominal,
                                 double sigma_nm, Point2 orientation, int samples,
                                 std::uint64_t seed, const PhcGeometry& geometry,
                                 const PurcellOptions& options, int threads) {
  if (!(sigma_nm >= 0.0) || !std::isfinite(sigma_nm)) {
    throw ValidationError("uncertainty band: sigma must be >= 0");
  }
  if (samples < 100) {
    throw ValidationError("uncertainty band: samples must be >= 100");
  }
  if (!(n_g > 0.0)) {
    throw ValidationError("uncertainty band: n_g must be > 0");
  }
  check_orientation(orientation);

  UncertaintyBand band;
  band.nominal = nominal;
  band.sigma_nm = sigma_nm;
  band.samples = samples;
  band.seed = seed;
  band.nominal_value = purcell_factor(field, n_g, {nominal, orientation, 0.0}, geometry, options) / n_g;

  const auto positions =
      draw_positions(nominal, sigma_nm, samples, seed, geometry, threads, band.rejection_fraction);
  std::vector<double> values;
  values.reserve(positions.size());
  for (const auto& p : positions) {
    const Point2 q{wrap_unit(p.x), p.y};
    values.push_back(purcell_factor(field, n_g, {q, orientation, 0.0}, geometry, options) / n_g);
  }
  band.percentile_low = percentile(values, 0.16);
  band.percentile_high = percentile(values, 0.84);
  return band;
}

std::vector<Point2> default_designated_positions() {
  return {{0.1, 0.0}, {0.2, 0.0}, {0.4, 0.0}, {0.5, 0.0}, {0.5, 0.5}, {0.5, 0.8}, {0.5, 1.3}};
}

} // namespace slowlight
