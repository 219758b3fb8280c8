#pragma once

#include <cstdint>
#include <vector>

#include "slowlight/decay_model.hpp"

namespace slowlight {

struct TcspcSettings {
  long long total_counts = 100000;
  int n_bins = 512;
  double bin_width_ns = 12.0 / 512.0;
  double irf_fwhm_ns = 0.0;
  /// Share of total_counts spread uniformly over the window.
  double background_fraction = 0.0;
  /// Arrival time of the excitation pulse (centre of the IRF), ns.
  double t0_ns = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  double window_ns() const { return n_bins * bin_width_ns; }
};

struct DecayHistogram {
  std::vector<double> bin_edges; // n_bins + 1, ns
  std::vector<long long> counts;
  std::vector<double> expected;
  long long total_counts = 0;    // requested; equals the sum of expected
  double irf_fwhm_ns = 0.0;
  double background_per_bin = 0.0;
  double t0_ns = 0.0;
  std::uint64_t seed = 0;
  /// Window shorter than 3 lifetimes of the slowest component.
  bool truncated = false;

  int n_bins() const { return static_cast<int>(counts.size()); }
  double bin_width() const { return bin_edges[1] - bin_edges[0]; }
  long long observed_total() const;
};

/// Gaussian standard deviation of an IRF with the given FWHM.
double irf_sigma(double fwhm_ns);

/// Expected profile: exact bin integrals of the (IRF-blurred) decay model,
/// scaled so the signal carries (1 - background_fraction) * total_counts,
/// plus a flat background. Counts are Poisson draws from a generator seeded
/// with settings.seed.
DecayHistogram simulate_histogram(const DecayModel& model, const TcspcSettings& settings);

/// Expected profile only; counts are left empty.
DecayHistogram expected_histogram(const DecayModel& model, const TcspcSettings& settings);

} // namespace slowlight
