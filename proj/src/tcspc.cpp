#include "slowlight/tcspc.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "slowlight/error.hpp"

namespace slowlight {

void TcspcSettings::validate() const {
  if (total_counts < 1000) {
    throw ValidationError("tcspc: total_counts must be >= 1000");
  }
  if (n_bins < 2) {
    throw ValidationError("tcspc: n_bins must be >= 2");
  }
  if (!(bin_width_ns > 0.0) || !std::isfinite(bin_width_ns)) {
    throw ValidationError("tcspc: bin width must be > 0");
  }
  if (!(irf_fwhm_ns >= 0.0) || !std::isfinite(irf_fwhm_ns)) {
    throw ValidationError("tcspc: irf_fwhm must be >= 0");
  }
  if (!(background_fraction >= 0.0 && background_fraction <= 1.0)) {
    throw ValidationError("tcspc: background_fraction must lie in [0, 1]");
  }
  if (!std::isfinite(t0_ns)) {
    throw ValidationError("tcspc: t0 must be finite");
  }
}

long long DecayHistogram::observed_total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

double irf_sigma(double fwhm_ns) { return fwhm_ns / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

DecayHistogram expected_histogram(const DecayModel& model, const TcspcSettings& settings) {
  settings.validate();
  const double total = static_cast<double>(settings.total_counts);
  DecayHistogram h;
  h.total_counts = settings.total_counts;
  h.irf_fwhm_ns = settings.irf_fwhm_ns;
  h.t0_ns = settings.t0_ns;
  h.seed = settings.seed;
  h.background_per_bin = settings.background_fraction * total / settings.n_bins;
  h.bin_edges.resize(settings.n_bins + 1);
  for (int i = 0; i <= settings.n_bins; ++i) {
    h.bin_edges[i] = i * settings.bin_width_ns;
  }
  h.expected.assign(settings.n_bins, h.background_per_bin);
  if (settings.background_fraction < 1.0) {
    model.validate();
    const double sigma = irf_sigma(settings.irf_fwhm_ns);
    std::vector<double> signal(settings.n_bins);
    for (int i = 0; i < settings.n_bins; ++i) {
      signal[i] = model.integral(h.bin_edges[i] - settings.t0_ns,
                                 h.bin_edges[i + 1] - settings.t0_ns, sigma);
    }
    const double in_window = std::accumulate(signal.begin(), signal.end(), 0.0);
    if (!(in_window > 0.0)) {
      throw ValidationError("tcspc: decay model deposits no signal inside the window");
    }
    const double scale = (1.0 - settings.background_fraction) * total / in_window;
    for (int i = 0; i < settings.n_bins; ++i) {
      h.expected[i] += scale * signal[i];
    }
    h.truncated = settings.window_ns() - settings.t0_ns < 3.0 / model.slowest_rate();
  }
  return h;
}

DecayHistogram simulate_histogram(const DecayModel& model, const TcspcSettings& settings) {
  DecayHistogram h = expected_histogram(model, settings);
  std::mt19937_64 rng(settings.seed);
  h.counts.resize(h.expected.size());
  for (std::size_t i = 0; i < h.expected.size(); ++i) {
    std::poisson_distribution<long long> draw(h.expected[i]);
    h.counts[i] = h.expected[i] > 0.0 ? draw(rng) : 0;
  }
  return h;
}

} // namespace slowlight
