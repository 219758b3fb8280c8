#include "slowlight/fitkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pchip.hpp"

#include "optimizer.hpp"
#include "slowlight/error.hpp"

namespace slowlight {

const FitParameter& FitResult::operator[](const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) {
      return p;
    }
  }
  throw ValidationError("fit result has no parameter '" + name + "'");
}

HistogramData HistogramData::observed(const DecayHistogram& h) {
  HistogramData d;
  d.edges = h.bin_edges;
  d.counts.assign(h.counts.begin(), h.counts.end());
  return d;
}

HistogramData HistogramData::expected(const DecayHistogram& h) {
  return HistogramData{h.bin_edges, h.expected};
}

// ---------------------------------------------------------------------------
// Likelihood

namespace {

// q(G) = (1 - exp(-G w)) / G is the bin integral of exp(-G t) per unit
// amplitude; r = q'/q and dr = r'.
struct BinFactor {
  double q;
  double r;
  double dr;
};

BinFactor bin_factor(double g, double w) {
  const double x = g * w;
  if (x < 1e-3) {
    return {w * (1.0 - x * (0.5 - x / 6.0)), w * (-0.5 + x / 12.0 - x * x * x / 720.0),
            w * w * (1.0 / 12.0 - x * x / 240.0)};
  }
  const double em1 = std::expm1(x);
  return {-std::expm1(-x) / g, w / em1 - 1.0 / g,
          -w * w * (em1 + 1.0) / (em1 * em1) + 1.0 / (g * g)};
}

} // namespace

MultiExpLikelihood::MultiExpLikelihood(const HistogramData& data, double t_start_ns,
                                       int n_components)
    : n_components_(n_components) {
  if (data.edges.size() != data.counts.size() + 1 || data.counts.size() < 2) {
    throw ValidationError("histogram needs n_bins + 1 edges and at least 2 bins");
  }
  width_ = data.edges[1] - data.edges[0];
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    if (data.edges[i] >= t_start_ns - 1e-9 * width_) {
      starts_.push_back(data.edges[i]);
      counts_.push_back(data.counts[i]);
    }
  }
  if (counts_.size() < 20) {
    std::ostringstream msg;
    msg << "fit window from t = " << t_start_ns << " ns holds " << counts_.size()
        << " bins; at least 20 are required";
    throw ValidationError(msg.str());
  }
  if (counts_in_window() < 1000.0) {
    throw ValidationError("fit window holds fewer than 1000 counts");
  }
  t_ref_ = starts_.front();
}

double MultiExpLikelihood::counts_in_window() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0.0);
}

std::vector<double> MultiExpLikelihood::model(const Eigen::VectorXd& p) const {
  std::vector<double> mu(counts_.size(), p[2 * n_components_]);
  for (int k = 0; k < n_components_; ++k) {
    const double a = p[2 * k];
    const double g = p[2 * k + 1];
    const double q = bin_factor(g, width_).q;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      mu[i] += a * std::exp(-g * (starts_[i] - t_ref_)) * q;
    }
  }
  return mu;
}

double MultiExpLikelihood::evaluate(const Eigen::VectorXd& p, Eigen::VectorXd* gradient,
                                    Eigen::MatrixXd* hessian) const {
  const int np = n_params();
  const int nk = n_components_;
  std::vector<BinFactor> factors(nk);
  for (int k = 0; k < nk; ++k) {
    factors[k] = bin_factor(p[2 * k + 1], width_);
  }
  if (gradient) {
    gradient->setZero(np);
  }
  if (hessian) {
    hessian->setZero(np, np);
  }
  Eigen::VectorXd dmu(np);
  std::vector<double> h(nk);
  std::vector<double> dh(nk);
  std::vector<double> d2h(nk);
  double value = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    const double tau = starts_[i] - t_ref_;
    double mu = p[np - 1];
    for (int k = 0; k < nk; ++k) {
      const auto& f = factors[k];
      h[k] = std::exp(-p[2 * k + 1] * tau) * f.q;
      const double lead = f.r - tau;
      dh[k] = h[k] * lead;
      d2h[k] = h[k] * (lead * lead + f.dr);
      mu += p[2 * k] * h[k];
    }
    const double n = counts_[i];
    if (!(mu > 0.0)) {
      if (n > 0.0) {
        return std::numeric_limits<double>::infinity();
      }
      continue;
    }
    value += mu - n + (n > 0.0 ? n * std::log(n / mu) : 0.0);
    if (!gradient && !hessian) {
      continue;
    }
    for (int k = 0; k < nk; ++k) {
      dmu[2 * k] = h[k];
      dmu[2 * k + 1] = p[2 * k] * dh[k];
    }
    dmu[np - 1] = 1.0;
    const double resid = 1.0 - n / mu;
    if (gradient) {
      *gradient += resid * dmu;
    }
    if (hessian) {
      hessian->noalias() += (n / (mu * mu)) * dmu * dmu.transpose();
      for (int k = 0; k < nk; ++k) {
        (*hessian)(2 * k, 2 * k + 1) += resid * dh[k];
        (*hessian)(2 * k + 1, 2 * k) += resid * dh[k];
        (*hessian)(2 * k + 1, 2 * k + 1) += resid * p[2 * k] * d2h[k];
      }
    }
  }
  return value;
}

// ---------------------------------------------------------------------------
// Histogram fits

double default_fit_start(const HistogramData& data) {
  if (data.counts.empty()) {
    throw ValidationError("empty histogram");
  }
  const auto peak = std::max_element(data.counts.begin(), data.counts.end()) - data.counts.begin();
  const auto first = std::min<std::size_t>(peak + 1, data.counts.size() - 1);
  return data.edges[first];
}

namespace {

constexpr double kChi2TwoDof999 = 13.815510557964274; // 0.1% tail, 2 degrees of freedom

struct Guess {
  double amplitude;
  double gamma;
  double background;
};

Guess initial_guess(const MultiExpLikelihood& like, const HistogramData& data) {
  std::vector<double> t;
  std::vector<double> n;
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    if (data.edges[i] >= like.t_ref() - 1e-12) {
      t.push_back(data.edges[i] - like.t_ref());
      n.push_back(data.counts[i]);
    }
  }
  const std::size_t tail = std::max<std::size_t>(1, n.size() / 10);
  double background = 0.0;
  for (std::size_t i = n.size() - tail; i < n.size(); ++i) {
    background += n[i];
  }
  background /= static_cast<double>(tail);
  double weight = 0.0;
  double moment = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double s = std::max(0.0, n[i] - background);
    weight += s;
    moment += s * t[i];
  }
  const double window = like.window();
  double gamma = weight > 0.0 && moment > 0.0 ? weight / moment : 1.0 / window;
  gamma = std::clamp(gamma, 0.5 / window, 200.0 / window);
  const double width = data.edges[1] - data.edges[0];
  double shape = 0.0;
  for (double ti : t) {
    shape += std::exp(-gamma * ti) * (-std::expm1(-gamma * width)) / gamma;
  }
  return {std::max(weight, 1.0) / shape, gamma, background};
}

detail::BoundedProblem make_problem(const MultiExpLikelihood& like, RateParameterization param) {
  const int np = like.n_params();
  detail::BoundedProblem problem;
  problem.lower = Eigen::VectorXd::Zero(np);
  problem.strict.assign(np, false);
  for (int k = 0; k < like.n_components(); ++k) {
    problem.strict[2 * k + 1] = true;
  }
  if (param == RateParameterization::Rate) {
    problem.objective = [&like](const Eigen::VectorXd& x, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
      return like.evaluate(x, g, h);
    };
    return problem;
  }
  // Lifetime coordinates: tau_k = 1 / Gamma_k, chain rule on the rate form.
  problem.objective = [&like](const Eigen::VectorXd& x, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    Eigen::VectorXd p = x;
    Eigen::VectorXd jac = Eigen::VectorXd::Ones(x.size());
    Eigen::VectorXd curv = Eigen::VectorXd::Zero(x.size());
    for (int k = 0; k < like.n_components(); ++k) {
      const double tau = x[2 * k + 1];
      p[2 * k + 1] = 1.0 / tau;
      jac[2 * k + 1] = -1.0 / (tau * tau);
      curv[2 * k + 1] = 2.0 / (tau * tau * tau);
    }
    Eigen::VectorXd gp;
    Eigen::MatrixXd hp;
    const double v = like.evaluate(p, (g || h) ? &gp : nullptr, h ? &hp : nullptr);
    if (!std::isfinite(v)) {
      return v;
    }
    if (g) {
      *g = gp.cwiseProduct(jac);
    }
    if (h) {
      *h = jac.asDiagonal() * hp * jac.asDiagonal();
      h->diagonal() += gp.cwiseProduct(curv);
    }
    return v;
  };
  return problem;
}

Eigen::VectorXd to_rates(Eigen::VectorXd x, int n_components, RateParameterization param) {
  if (param == RateParameterization::Lifetime) {
    for (int k = 0; k < n_components; ++k) {
      x[2 * k + 1] = 1.0 / x[2 * k + 1];
    }
  }
  return x;
}

Eigen::VectorXd from_rates(Eigen::VectorXd x, int n_components, RateParameterization param) {
  return to_rates(std::move(x), n_components, param); // the map is its own inverse
}

// Covariance from the inverse observed information in rate coordinates,
// restricted to the free parameters when the full matrix is singular.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& hessian, const std::vector<bool>& active) {
  const Eigen::Index n = hessian.rows();
  Eigen::LLT<Eigen::MatrixXd> full(hessian);
  if (full.info() == Eigen::Success) {
    return full.solve(Eigen::MatrixXd::Identity(n, n));
  }
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!active[i]) {
      free.push_back(i);
    }
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  Eigen::MatrixXd sub(free.size(), free.size());
  for (std::size_t a = 0; a < free.size(); ++a) {
    for (std::size_t b = 0; b < free.size(); ++b) {
      sub(a, b) = hessian(free[a], free[b]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> reduced(sub);
  if (reduced.info() != Eigen::Success) {
    return cov;
  }
  const Eigen::MatrixXd inv = reduced.solve(Eigen::MatrixXd::Identity(sub.rows(), sub.cols()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[i]) {
      cov.row(i).setZero();
      cov.col(i).setZero();
    }
  }
  for (std::size_t a = 0; a < free.size(); ++a) {
    for (std::size_t b = 0; b < free.size(); ++b) {
      cov(free[a], free[b]) = inv(a, b);
    }
  }
  return cov;
}

struct RawFit {
  Eigen::VectorXd rates; // rate coordinates
  detail::OptimizerResult opt;
};

RawFit run_fit(const MultiExpLikelihood& like, const Eigen::VectorXd& start_rates,
               const FitOptions& options) {
  const auto problem = make_problem(like, options.parameterization);
  const Eigen::VectorXd x0 = from_rates(start_rates, like.n_components(), options.parameterization);
  RawFit fit{{}, detail::minimize_bounded(problem, x0, options.tolerance, options.max_iterations)};
  fit.rates = to_rates(fit.opt.x, like.n_components(), options.parameterization);
  return fit;
}

[[noreturn]] void throw_not_converged(const RawFit& fit, int max_iterations) {
  std::ostringstream msg;
  msg << "lifetime fit did not converge in " << max_iterations << " iterations; last iterate:";
  for (Eigen::Index i = 0; i < fit.rates.size(); ++i) {
    msg << ' ' << fit.rates[i];
  }
  throw ConvergenceError(msg.str());
}

FitResult assemble(const MultiExpLikelihood& like, const RawFit& fit,
                   const std::vector<std::string>& names, const std::string& model) {
  FitResult result;
  result.model = model;
  result.objective = fit.opt.value;
  result.converged = fit.opt.converged;
  result.iterations = fit.opt.iterations;

  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  like.evaluate(fit.rates, &g, &h);
  std::vector<bool> active(fit.rates.size(), false);
  for (Eigen::Index i = 0; i < fit.rates.size(); ++i) {
    active[i] = fit.opt.active[i];
  }
  result.covariance = covariance(h, active);
  const double fscale = std::max(1.0, std::abs(fit.opt.value));
  for (Eigen::Index i = 0; i < fit.rates.size(); ++i) {
    if (!active[i]) {
      result.gradient_norm = std::max(
          result.gradient_norm, std::abs(g[i]) * std::max(1.0, std::abs(fit.rates[i])) / fscale);
    }
    const double var = result.covariance(i, i);
    result.parameters.push_back(
        {names[i], fit.rates[i], std::isfinite(var) ? std::sqrt(std::max(var, 0.0)) : var,
         active[i] || fit.rates[i] <= 0.0});
  }
  return result;
}

void check_decay(const FitResult& r, const MultiExpLikelihood& like, const std::string& amp,
                 const std::string& rate) {
  const auto& a = r[amp];
  const auto& g = r[rate];
  const bool flat = g.value * like.window() < 1e-3;
  if (a.value <= 0.0 || !std::isfinite(a.error) || a.value < 2.0 * a.error || flat) {
    std::ostringstream msg;
    msg << "no decaying component: amplitude " << a.value << " +- " << a.error
        << " is consistent with zero at 2 sigma";
    throw NoDecayError(msg.str());
  }
}

} // namespace

FitResult fit_single_exp(const HistogramData& data, double t_start_ns, const FitOptions& options) {
  const MultiExpLikelihood like(data, t_start_ns, 1);
  const Guess guess = initial_guess(like, data);
  Eigen::VectorXd start(3);
  start << guess.amplitude, guess.gamma, guess.background;
  const RawFit fit = run_fit(like, start, options);
  if (!fit.opt.converged) {
    throw_not_converged(fit, options.max_iterations);
  }
  FitResult result = assemble(like, fit, {"amplitude", "gamma", "background"}, "single");
  check_decay(result, like, "amplitude", "gamma");
  return result;
}

FitResult fit_single_exp(const DecayHistogram& hist, double t_start_ns, const FitOptions& options) {
  return fit_single_exp(HistogramData::observed(hist), t_start_ns, options);
}

FitResult fit_biexp(const HistogramData& data, double t_start_ns, const FitOptions& options) {
  FitResult single = fit_single_exp(data, t_start_ns, options);
  const MultiExpLikelihood like(data, t_start_ns, 2);
  const double g0 = single.value("gamma");
  const double a0 = single.value("amplitude");
  const double b0 = single.value("background");

  std::optional<RawFit> best;
  for (const auto& [fast, slow] : {std::pair{2.0, 0.5}, std::pair{1.5, 0.7}, std::pair{4.0, 0.8},
                                   std::pair{1.2, 0.3}}) {
    Eigen::VectorXd start(5);
    start << 0.5 * a0 * fast, g0 * fast, 0.5 * a0 * slow, g0 * slow, b0;
    RawFit fit = run_fit(like, start, options);
    if (fit.opt.converged && (!best || fit.opt.value < best->opt.value)) {
      best = std::move(fit);
    }
  }
  auto collapse = [&single] {
    single.collapsed = true;
    return single;
  };
  if (!best) {
    return collapse();
  }
  Eigen::VectorXd& x = best->rates;
  if (x[1] < x[3]) {
    std::swap(x[0], x[2]);
    std::swap(x[1], x[3]);
    std::swap(best->opt.active[0], best->opt.active[2]);
    std::swap(best->opt.active[1], best->opt.active[3]);
  }
  const double lr = 2.0 * (single.objective - best->opt.value);
  if (x[1] / x[3] < 1.05 || x[0] <= 0.0 || x[2] <= 0.0 || lr < kChi2TwoDof999) {
    return collapse();
  }
  FitResult result = assemble(
      like, *best, {"amplitude_fast", "gamma_fast", "amplitude_slow", "gamma_slow", "background"},
      "biexponential");
  const auto& af = result["amplitude_fast"];
  const auto& as = result["amplitude_slow"];
  if (!(af.value > 2.0 * af.error) || !(as.value > 2.0 * as.error)) {
    return collapse();
  }
  return result;
}

FitResult fit_biexp(const DecayHistogram& hist, double t_start_ns, const FitOptions& options) {
  return fit_biexp(HistogramData::observed(hist), t_start_ns, options);
}

// ---------------------------------------------------------------------------
// n_g model

NgModel::NgModel(const BandStructure& bands, double calibration_offset_nm)
    : offset_nm_(calibration_offset_nm), cap_(bands.ng_cap) {
  if (bands.guided_band < 0 || !bands.band_edge_wavelength_nm) {
    throw ValidationError("n_g model needs a guided band solved up to k = 0.5");
  }
  if (!std::isfinite(calibration_offset_nm)) {
    throw ValidationError("n_g model: calibration offset must be finite");
  }
  edge_nm_ = *bands.band_edge_wavelength_nm;
  const int b = bands.guided_band;
  // Interior samples ordered from the edge outward (ascending detuning).
  std::vector<std::pair<double, double>> samples;
  for (std::size_t i = bands.k.size(); i-- > 0;) {
    const double k = bands.k[i];
    if (k <= 0.0 || k >= 0.5 || i == 0 || i + 1 == bands.k.size()) {
      continue;
    }
    const double dl = edge_nm_ - bands.wavelength_nm(b, i);
    if (!(dl > 0.0)) {
      continue;
    }
    samples.emplace_back(dl, std::min(group_index(bands, b, k).value, cap_));
  }
  std::sort(samples.begin(), samples.end());
  if (samples.size() < 3) {
    throw ValidationError("n_g model needs at least 3 interior samples of the guided band");
  }
  dl_.push_back(0.0);
  ng_.push_back(cap_);
  for (const auto& [dl, ng] : samples) {
    if (dl <= dl_.back()) {
      continue;
    }
    dl_.push_back(dl);
    ng_.push_back(std::min(ng, ng_.back())); // non-increasing in detuning
  }
  auto x = dl_;
  auto y = ng_;
  interpolant_ = boost::math::interpolators::pchip<std::vector<double>>(std::move(x), std::move(y));
}

double NgModel::operator()(double delta_lambda_nm) const {
  if (!(delta_lambda_nm > 0.0)) {
    std::ostringstream msg;
    msg << "detuning " << delta_lambda_nm << " nm lies at or beyond the band edge";
    throw ValidationError(msg.str());
  }
  if (delta_lambda_nm > dl_.back()) {
    std::ostringstream msg;
    msg << "detuning " << delta_lambda_nm << " nm exceeds the sampled range (" << dl_.back()
        << " nm)";
    throw ValidationError(msg.str());
  }
  return std::clamp(interpolant_(delta_lambda_nm), ng_.back(), cap_);
}

double NgModel::detuning(double emission_wavelength_nm) const {
  return edge_nm_ + offset_nm_ - emission_wavelength_nm;
}

NgModel ng_model(const BandStructure& bands, double calibration_offset_nm) {
  return NgModel(bands, calibration_offset_nm);
}

// ---------------------------------------------------------------------------
// Linear fits

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 1e-12 * std::max(1.0, a.norm() * b.norm());
  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) {
        idx.push_back(j);
      }
    }
    Eigen::MatrixXd sub(a.rows(), idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c) {
      sub.col(c) = a.col(idx[c]);
    }
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      z[idx[c]] = zs[c];
    }
  };
  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w[j] > tol && (best < 0 || w[j] > w[best])) {
        best = j;
      }
    }
    if (best < 0) {
      break;
    }
    passive[best] = true;
    Eigen::VectorXd z;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      solve_passive(z);
      bool all_positive = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) {
          all_positive = false;
        }
      }
      if (all_positive) {
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && z[j] <= 0.0) {
          alpha = std::min(alpha, x[j] / (x[j] - z[j]));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x[j] <= tol) {
          passive[j] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z;
  }
  return x;
}

namespace {

LinearFit linear_rate_fit(std::span<const TuningPoint> points, int n_qd, double gamma_bulk_r,
                          const std::string& model) {
  if (!(gamma_bulk_r > 0.0)) {
    throw ValidationError("gamma_B,r must be > 0");
  }
  const auto m = static_cast<Eigen::Index>(points.size());
  const Eigen::Index n = 1 + n_qd;
  if (m < 2) {
    throw ValidationError(model + ": at least 2 points are required");
  }
  std::vector<int> per_qd(n_qd, 0);
  for (const auto& p : points) {
    if (p.qd < 0 || p.qd >= n_qd) {
      throw ValidationError(model + ": point refers to an unknown QD index");
    }
    if (!(p.delta_lambda_nm > 0.0) || !(p.gamma > 0.0) || !(p.sigma > 0.0) || !(p.n_g > 0.0)) {
      throw ValidationError(model + ": points need delta_lambda > 0, gamma > 0, sigma > 0, n_g > 0");
    }
    ++per_qd[p.qd];
  }
  for (int j = 0; j < n_qd; ++j) {
    if (per_qd[j] == 0) {
      throw ValidationError(model + ": every QD needs at least one point");
    }
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = points[i];
    const double w = 1.0 / p.sigma;
    a(i, 0) = p.n_g * w;
    a(i, 1 + p.qd) = w;
    b[i] = p.gamma * w;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) {
    throw UnidentifiableError(model +
                              ": A and gamma_nr are not identifiable (n_g does not vary within any QD)");
  }
  const Eigen::VectorXd x = nnls(a, b);
  const Eigen::VectorXd resid = b - a * x;

  LinearFit out;
  FitResult& f = out.fit;
  f.model = model;
  f.objective = resid.squaredNorm();
  f.converged = true;
  f.iterations = 1;
  const Eigen::VectorXd grad = -2.0 * a.transpose() * resid;

  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (x[j] > 0.0) {
      free.push_back(j);
    }
  }
  Eigen::MatrixXd info = a.transpose() * a;
  f.covariance = Eigen::MatrixXd::Zero(n, n);
  if (!free.empty()) {
    Eigen::MatrixXd sub(free.size(), free.size());
    for (std::size_t r = 0; r < free.size(); ++r) {
      for (std::size_t c = 0; c < free.size(); ++c) {
        sub(r, c) = info(free[r], free[c]);
      }
    }
    const Eigen::MatrixXd inv = sub.ldlt().solve(Eigen::MatrixXd::Identity(sub.rows(), sub.cols()));
    for (std::size_t r = 0; r < free.size(); ++r) {
      for (std::size_t c = 0; c < free.size(); ++c) {
        f.covariance(free[r], free[c]) = inv(r, c);
      }
    }
  }
  const double fscale = std::max(1.0, f.objective);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::string name = j == 0 ? "a_gamma_br"
                              : (n_qd == 1 ? "gamma_nr" : "gamma_nr[" + std::to_string(j - 1) + "]");
    const bool bound = x[j] <= 0.0;
    if (!bound) {
      f.gradient_norm =
          std::max(f.gradient_norm, std::abs(grad[j]) * std::max(1.0, std::abs(x[j])) / fscale);
    }
    f.parameters.push_back({name, x[j], std::sqrt(std::max(0.0, f.covariance(j, j))), bound});
  }
  out.coupling = x[0] / gamma_bulk_r;
  for (const auto& p : points) {
    const double radiative = x[0] * p.n_g;
    const double total = radiative + x[1 + p.qd];
    out.fitted_gamma.push_back(total);
    out.quantum_efficiency.push_back(total > 0.0 ? radiative / total : 0.0);
  }
  return out;
}

} // namespace

LinearFit fit_tuning_curve(std::span<const TuningPoint> points, double gamma_bulk_r) {
  std::vector<TuningPoint> single(points.begin(), points.end());
  for (auto& p : single) {
    p.qd = 0;
  }
  return linear_rate_fit(single, 1, gamma_bulk_r, "tuning");
}

LinearFit global_fit(const GlobalFitGroup& group, double gamma_bulk_r) {
  int n_qd = 0;
  for (const auto& p : group.points) {
    n_qd = std::max(n_qd, p.qd + 1);
  }
  return linear_rate_fit(group.points, n_qd, gamma_bulk_r, "global");
}

} // namespace slowlight
