#include "slowlight/decay_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slowlight/error.hpp"

namespace slowlight {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Asymptotic exp(w^2) erfc(w) for large w; relative error below 1e-10 at w >= 25.
double erfcx_asymptotic(double w) {
  const double w2 = w * w;
  return (1.0 - 0.5 / w2 + 0.75 / (w2 * w2) - 1.875 / (w2 * w2 * w2)) /
         (w * std::sqrt(std::numbers::pi));
}

// exp(-rate t + rate^2 sigma^2 / 2) * Phi((t - rate sigma^2) / sigma) without
// overflow of the exponential or underflow of the tail probability.
double tilted_cdf(double rate, double t, double sigma) {
  const double z = (t - rate * sigma * sigma) / sigma;
  const double w = -z / std::numbers::sqrt2;
  if (w < 25.0) {
    return std::exp(-rate * t + 0.5 * rate * rate * sigma * sigma) * 0.5 * std::erfc(w);
  }
  return 0.5 * erfcx_asymptotic(w) * std::exp(-0.5 * (t / sigma) * (t / sigma));
}

// 1 - exp(-x) (1 + x), accurate for small x.
double one_minus_exp_poly(double x) {
  if (x < 1e-2) {
    return x * x * (0.5 - x * (1.0 / 3.0 - x * (0.125 - x / 30.0)));
  }
  return -std::expm1(-x) - x * std::exp(-x);
}

double unblurred_cumulative(const DecayTerm& term, double t) {
  if (t <= 0.0) {
    return 0.0;
  }
  const double g = term.rate;
  if (term.power == 0) {
    return -term.amplitude * std::expm1(-g * t) / g;
  }
  return term.amplitude * one_minus_exp_poly(g * t) / (g * g);
}

// Exact integral of an unblurred term over [t1, t2], written to avoid the
// cancellation of F(t2) - F(t1) in the tail.
double unblurred_integral(const DecayTerm& term, double t1, double t2) {
  t1 = std::max(t1, 0.0);
  if (t2 <= t1) {
    return 0.0;
  }
  const double g = term.rate;
  const double w = t2 - t1;
  if (t1 == 0.0) {
    return unblurred_cumulative(term, t2);
  }
  const double head = std::exp(-g * t1);
  const double one_minus = -std::expm1(-g * w);
  if (term.power == 0) {
    return term.amplitude * head * one_minus / g;
  }
  return term.amplitude * head * ((1.0 + g * t1) * one_minus - g * w * std::exp(-g * w)) / (g * g);
}

} // namespace

DecayModel DecayModel::single_exponential(double rate, double amplitude) {
  return DecayModel{{{amplitude, 0, rate}}};
}

DecayModel DecayModel::biexponential(double rate_1, double amplitude_1, double rate_2,
                                     double amplitude_2) {
  return DecayModel{{{amplitude_1, 0, rate_1}, {amplitude_2, 0, rate_2}}};
}

void DecayModel::validate() const {
  if (terms.empty()) {
    throw ValidationError("decay model has no terms");
  }
  for (const auto& term : terms) {
    if (!(term.rate > 0.0) || !std::isfinite(term.rate)) {
      throw ValidationError("decay model rates must be finite and > 0");
    }
    if (term.power != 0 && term.power != 1) {
      throw ValidationError("decay model term powers must be 0 or 1");
    }
    if (!std::isfinite(term.amplitude)) {
      throw ValidationError("decay model amplitudes must be finite");
    }
  }
}

double DecayModel::intensity(double t) const {
  if (t < 0.0) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& term : terms) {
    sum += term.amplitude * (term.power == 1 ? t : 1.0) * std::exp(-term.rate * t);
  }
  return sum;
}

double blurred_cumulative(const DecayTerm& term, double t, double sigma) {
  if (sigma <= 0.0) {
    return unblurred_cumulative(term, t);
  }
  const double g = term.rate;
  const double k_phi = tilted_cdf(g, t, sigma);
  if (term.power == 0) {
    return term.amplitude * (normal_cdf(t / sigma) - k_phi) / g;
  }
  const double shifted_mean = t - g * sigma * sigma;
  return term.amplitude *
         (normal_cdf(t / sigma) - (1.0 + g * shifted_mean) * k_phi -
          g * sigma * normal_pdf(t / sigma)) /
         (g * g);
}

double DecayModel::integral(double t1, double t2, double sigma) const {
  double sum = 0.0;
  for (const auto& term : terms) {
    if (sigma <= 0.0) {
      sum += unblurred_integral(term, t1, t2);
    } else {
      sum += blurred_cumulative(term, t2, sigma) - blurred_cumulative(term, t1, sigma);
    }
  }
  return sum;
}

double DecayModel::total_integral() const {
  double sum = 0.0;
  for (const auto& term : terms) {
    sum += term.amplitude / (term.power == 1 ? term.rate * term.rate : term.rate);
  }
  return sum;
}

double DecayModel::slowest_rate() const {
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& term : terms) {
    if (term.amplitude != 0.0) {
      slowest = std::min(slowest, term.rate);
    }
  }
  return slowest;
}

} // namespace slowlight
