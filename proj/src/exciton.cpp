#include "slowlight/exciton.hpp"

#include <algorithm>
#include <cmath>

#include "slowlight/error.hpp"

namespace slowlight {

namespace {

bool valid_rate(double g) { return g >= 0.0 && std::isfinite(g); }

// Bright/dark pair  b' = -alpha b + gamma_db d,  d' = gamma_bd b - beta d.
// Eigenvalues m +- s with m = -(alpha + beta)/2.
struct PairSolution {
  double m = 0.0;
  double s = 0.0;
  double delta = 0.0; // (beta - alpha) / 2
  double gamma_bd = 0.0;
  double gamma_db = 0.0;

  PairSolution(const DipoleRates& r, double gamma_d_nr) {
    const double alpha = r.gamma_b_r + r.gamma_b_nr + r.gamma_bd;
    const double beta = gamma_d_nr + r.gamma_db;
    m = -0.5 * (alpha + beta);
    delta = 0.5 * (beta - alpha);
    s = std::sqrt(delta * delta + r.gamma_bd * r.gamma_db);
    gamma_bd = r.gamma_bd;
    gamma_db = r.gamma_db;
  }

  // e^{mt} cosh(st) and e^{mt} sinh(st)/s, the second by series when st is
  // small so that the degenerate limit s -> 0 is continuous.
  std::pair<double, double> propagators(double t) const {
    const double x = s * t;
    const double cosh_part = 0.5 * (std::exp((m + s) * t) + std::exp((m - s) * t));
    double sinh_part;
    if (x < 1e-3) {
      const double x2 = x * x;
      sinh_part = std::exp(m * t) * t * (1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0)));
    } else {
      sinh_part = 0.5 * (std::exp((m + s) * t) - std::exp((m - s) * t)) / s;
    }
    return {cosh_part, sinh_part};
  }

  std::pair<double, double> evolve(double b0, double d0, double t) const {
    const auto [c, sh] = propagators(t);
    return {c * b0 + sh * (delta * b0 + gamma_db * d0), c * d0 + sh * (gamma_bd * b0 - delta * d0)};
  }

  // Bright population as exponential terms, scaled by `weight`.
  void append_terms(double b0, double d0, double weight, std::vector<DecayTerm>& out) const {
    const double drive = delta * b0 + gamma_db * d0;
    if (s < 1e-7) {
      out.push_back({weight * b0, 0, -m});
      out.push_back({weight * drive, 1, -m});
      return;
    }
    out.push_back({weight * 0.5 * (b0 + drive / s), 0, -(m + s)});
    out.push_back({weight * 0.5 * (b0 - drive / s), 0, -(m - s)});
  }
};

} // namespace

void RatePair::validate() const {
  if (!valid_rate(gamma_r) || !valid_rate(gamma_nr)) {
    throw ValidationError("rates must be finite and >= 0");
  }
  if (gamma_r + gamma_nr <= 0.0) {
    throw ValidationError("gamma_r and gamma_nr cannot both be zero");
  }
}

double total_rate(const RatePair& rates) { return rates.gamma_r + rates.gamma_nr; }

double quantum_efficiency(const RatePair& rates) {
  rates.validate();
  return rates.gamma_r / (rates.gamma_r + rates.gamma_nr);
}

double waveguide_radiative_rate(double coupling, double n_g, double gamma_bulk_r) {
  if (!valid_rate(coupling) || !valid_rate(n_g) || !valid_rate(gamma_bulk_r)) {
    throw ValidationError("waveguide radiative rate: inputs must be finite and >= 0");
  }
  return coupling * n_g * gamma_bulk_r;
}

void ExcitonSystem::validate() const {
  for (const auto* d : {&x, &y}) {
    if (!valid_rate(d->gamma_b_r) || !valid_rate(d->gamma_b_nr) || !valid_rate(d->gamma_bd) ||
        !valid_rate(d->gamma_db)) {
      throw ValidationError("exciton rates must be finite and >= 0");
    }
  }
  if (!valid_rate(gamma_d_nr)) {
    throw ValidationError("exciton rates must be finite and >= 0");
  }
  double sum = 0.0;
  for (double p : initial_populations) {
    if (!(p >= 0.0)) {
      throw ValidationError("initial populations must be >= 0");
    }
    sum += p;
  }
  if (sum > 1.0 + 1e-12) {
    throw ValidationError("initial populations must sum to <= 1");
  }
}

std::vector<ExcitonState> populations(const ExcitonSystem& system, std::span<const double> t_ns) {
  system.validate();
  for (std::size_t i = 0; i < t_ns.size(); ++i) {
    if (!(t_ns[i] >= 0.0) || (i > 0 && !(t_ns[i] > t_ns[i - 1]))) {
      throw ValidationError("time grid must be increasing and >= 0");
    }
  }
  const PairSolution px(system.x, system.gamma_d_nr);
  const PairSolution py(system.y, system.gamma_d_nr);
  const auto& p0 = system.initial_populations;
  std::vector<ExcitonState> out(t_ns.size());
  for (std::size_t i = 0; i < t_ns.size(); ++i) {
    const auto [bx, dx] = px.evolve(p0[0], p0[2], t_ns[i]);
    const auto [by, dy] = py.evolve(p0[1], p0[3], t_ns[i]);
    out[i].rho = {bx, by, dx, dy};
  }
  return out;
}

std::vector<double> decay_curve(const ExcitonSystem& system, std::span<const double> t_ns) {
  const auto states = populations(system, t_ns);
  std::vector<double> intensity(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    intensity[i] = std::max(0.0, system.x.gamma_b_r * states[i].rho[0] +
                                     system.y.gamma_b_r * states[i].rho[1]);
  }
  return intensity;
}

DecayModel to_decay_model(const ExcitonSystem& system) {
  system.validate();
  const auto& p0 = system.initial_populations;
  std::vector<DecayTerm> raw;
  PairSolution(system.x, system.gamma_d_nr).append_terms(p0[0], p0[2], system.x.gamma_b_r, raw);
  PairSolution(system.y, system.gamma_d_nr).append_terms(p0[1], p0[3], system.y.gamma_b_r, raw);
  double scale = 0.0;
  for (const auto& t : raw) {
    scale = std::max(scale, std::abs(t.amplitude));
  }
  DecayModel model;
  for (const auto& t : raw) {
    if (std::abs(t.amplitude) > 1e-14 * scale) {
      if (!(t.rate > 0.0)) {
        throw ValidationError("exciton intensity has a non-decaying component");
      }
      model.terms.push_back(t);
    }
  }
  if (model.terms.empty()) {
    throw ValidationError("exciton system emits no photons (zero radiative rates or populations)");
  }
  return model;
}

std::array<double, 4> rate_equations(const ExcitonSystem& s, const std::array<double, 4>& rho) {
  const double ax = s.x.gamma_b_r + s.x.gamma_b_nr + s.x.gamma_bd;
  const double ay = s.y.gamma_b_r + s.y.gamma_b_nr + s.y.gamma_bd;
  return {-ax * rho[0] + s.x.gamma_db * rho[2], -ay * rho[1] + s.y.gamma_db * rho[3],
          s.x.gamma_bd * rho[0] - (s.gamma_d_nr + s.x.gamma_db) * rho[2],
          s.y.gamma_bd * rho[1] - (s.gamma_d_nr + s.y.gamma_db) * rho[3]};
}

} // namespace slowlight
