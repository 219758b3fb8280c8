#pragma once

#include <vector>

namespace slowlight {

/// amplitude * t^power * exp(-rate * t) for t >= 0, zero before.
struct DecayTerm {
  double amplitude = 1.0;
  int power = 0; // 0 or 1
  double rate = 1.0; // ns^-1
};

/// Intensity I(t) as a sum of exponential terms, time in ns.
struct DecayModel {
  std::vector<DecayTerm> terms;

  static DecayModel single_exponential(double rate, double amplitude = 1.0);
  static DecayModel biexponential(double rate_1, double amplitude_1, double rate_2,
                                  double amplitude_2);

  /// Throws ValidationError on empty models, non-positive rates or powers
  /// other than 0 and 1.
  void validate() const;

  double intensity(double t) const;
  /// Integral of I over [t1, t2] after convolution with a zero-mean Gaussian
  /// of standard deviation sigma (sigma = 0 means no blur). Exact.
  double integral(double t1, double t2, double sigma = 0.0) const;
  /// Integral over [0, inf).
  double total_integral() const;
  /// Smallest rate among terms with non-zero amplitude.
  double slowest_rate() const;
};

/// Cumulative integral of a term blurred by a Gaussian: integral of
/// (term * N(0, sigma)) from -inf to t.
double blurred_cumulative(const DecayTerm& term, double t, double sigma);

} // namespace slowlight
