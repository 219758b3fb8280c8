#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "slowlight/decay_model.hpp"

namespace slowlight {

enum class RateContext { Bulk, Waveguide };

/// Radiative and non-radiative rates of one transition, ns^-1.
struct RatePair {
  double gamma_r = 0.0;
  double gamma_nr = 0.0;
  RateContext context = RateContext::Bulk;

  void validate() const;
};

/// Gamma = gamma_r + gamma_nr.
double total_rate(const RatePair& rates);

/// QE = gamma_r / (gamma_r + gamma_nr). Throws ValidationError when both are 0.
double quantum_efficiency(const RatePair& rates);

/// gamma_wg,r = A * n_g * gamma_B,r, with A the dimensionless per-position
/// coupling (F_P / n_g).
double waveguide_radiative_rate(double coupling, double n_g, double gamma_bulk_r);

/// Rates (ns^-1) of one bright exciton and its coupling to the dark state.
struct DipoleRates {
  double gamma_b_r = 1.0;
  double gamma_b_nr = 2.9;
  double gamma_bd = 0.0;
  double gamma_db = 0.0;
};

/// Four-level neutral exciton: bright X and Y, each spin-flip coupled to a
/// dark state with decay gamma_d_nr. No bright-bright coupling.
struct ExcitonSystem {
  DipoleRates x;
  DipoleRates y;
  double gamma_d_nr = 0.0;
  /// Order: X bright, Y bright, X dark, Y dark.
  std::array<double, 4> initial_populations{0.5, 0.5, 0.0, 0.0};

  void validate() const;
};

/// Populations of the four states at one time.
struct ExcitonState {
  std::array<double, 4> rho{};
  double total() const { return rho[0] + rho[1] + rho[2] + rho[3]; }
};

/// Closed-form solution of the rate equations at each time.
std::vector<ExcitonState> populations(const ExcitonSystem& system, std::span<const double> t_ns);

/// Detected intensity I(t) = gamma_Xb,r rho_Xb(t) + gamma_Yb,r rho_Yb(t).
std::vector<double> decay_curve(const ExcitonSystem& system, std::span<const double> t_ns);

/// Same intensity written as a sum of exponential terms, for exact binning.
DecayModel to_decay_model(const ExcitonSystem& system);

/// Right-hand side d rho / dt of the rate equations; exposed for integrators.
std::array<double, 4> rate_equations(const ExcitonSystem& system, const std::array<double, 4>& rho);

} // namespace slowlight
