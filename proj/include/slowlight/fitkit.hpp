#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slowlight/phc_bands.hpp"
#include "slowlight/tcspc.hpp"

namespace slowlight {

struct FitParameter {
  std::string name;
  double value = 0.0;
  double error = 0.0;
  bool at_bound = false;
};

struct FitResult {
  std::vector<FitParameter> parameters;
  Eigen::MatrixXd covariance;
  /// Poisson half-deviance for histogram fits, chi^2 for linear fits.
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Largest |dF/dx_j| * max(|x_j|, 1) / max(|F|, 1) over free parameters.
  double gradient_norm = 0.0;
  /// Set by fit_biexp when the two-rate model is not supported by the data.
  bool collapsed = false;
  std::string model;

  const FitParameter& operator[](const std::string& name) const;
  double value(const std::string& name) const { return (*this)[name].value; }
  double error(const std::string& name) const { return (*this)[name].error; }
};

/// Bin edges and (possibly non-integer) counts; a view onto a histogram or
/// its expected profile.
struct HistogramData {
  std::vector<double> edges;
  std::vector<double> counts;

  static HistogramData observed(const DecayHistogram& h);
  static HistogramData expected(const DecayHistogram& h);
};

/// Poisson likelihood of n_components exponentials plus a flat background
/// over the bins that start at or after t_start. Parameters are
/// (A_1, Gamma_1, ..., A_K, Gamma_K, b): A_k in counts per ns at t_start,
/// Gamma_k in ns^-1, b in counts per bin.
class MultiExpLikelihood {
public:
  MultiExpLikelihood(const HistogramData& data, double t_start_ns, int n_components);

  int n_components() const { return n_components_; }
  int n_params() const { return 2 * n_components_ + 1; }
  int n_bins() const { return static_cast<int>(counts_.size()); }
  double counts_in_window() const;
  double t_ref() const { return t_ref_; }
  double window() const { return starts_.back() + width_ - t_ref_; }

  std::vector<double> model(const Eigen::VectorXd& p) const;
  /// Half-deviance sum(mu - n + n ln(n / mu)); +inf if some mu <= 0 where n > 0.
  double evaluate(const Eigen::VectorXd& p, Eigen::VectorXd* gradient = nullptr,
                  Eigen::MatrixXd* hessian = nullptr) const;

private:
  std::vector<double> starts_;
  std::vector<double> counts_;
  double width_ = 0.0;
  double t_ref_ = 0.0;
  int n_components_ = 1;
};

enum class RateParameterization { Rate, Lifetime };

struct FitOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
  RateParameterization parameterization = RateParameterization::Rate;
};

/// Start of the fit window: the first bin after the histogram peak.
double default_fit_start(const HistogramData& data);

/// Single-exponential Poisson MLE. Parameters: amplitude, gamma, background.
/// Throws NoDecayError when the amplitude is zero or below twice its error,
/// ConvergenceError (with the last iterate) after max_iterations.
FitResult fit_single_exp(const HistogramData& data, double t_start_ns, const FitOptions& options = {});
FitResult fit_single_exp(const DecayHistogram& hist, double t_start_ns, const FitOptions& options = {});

/// Two-rate Poisson MLE with gamma_fast > gamma_slow. Falls back to the
/// single-exponential result with `collapsed` set when the rates are within
/// 5% of each other, an amplitude vanishes, or the likelihood-ratio test
/// against one rate is not significant at 0.1%.
FitResult fit_biexp(const HistogramData& data, double t_start_ns, const FitOptions& options = {});
FitResult fit_biexp(const DecayHistogram& hist, double t_start_ns, const FitOptions& options = {});

/// Monotone map from detuning (nm) to group index built from the guided band.
class NgModel {
public:
  NgModel(const BandStructure& bands, double calibration_offset_nm);

  /// n_g at detuning dl > 0; the cap as dl -> 0. Throws ValidationError for
  /// dl <= 0 or beyond the sampled range.
  double operator()(double delta_lambda_nm) const;
  /// Detuning of an emitter at the given wavelength from the calibrated edge.
  double detuning(double emission_wavelength_nm) const;
  double band_edge_nm() const { return edge_nm_; }
  double max_detuning() const { return dl_.back(); }
  double cap() const { return cap_; }
  const std::vector<double>& sample_detunings() const { return dl_; }
  const std::vector<double>& sample_group_indices() const { return ng_; }

private:
  std::vector<double> dl_;
  std::vector<double> ng_;
  std::function<double(double)> interpolant_;
  double edge_nm_ = 0.0;
  double offset_nm_ = 0.0;
  double cap_ = 500.0;
};

NgModel ng_model(const BandStructure& bands, double calibration_offset_nm = 0.0);

struct TuningPoint {
  double delta_lambda_nm = 0.0;
  double gamma = 0.0; // ns^-1
  double sigma = 0.0; // ns^-1
  double n_g = 0.0;
  int qd = 0;         // emitter index inside a global-fit group
};

struct LinearFit {
  /// Parameters: "a_gamma_br" (A * gamma_B,r) and one "gamma_nr" per QD
  /// ("gamma_nr" alone for a single emitter, "gamma_nr[j]" otherwise).
  FitResult fit;
  double coupling = 0.0; // A = a_gamma_br / gamma_B,r
  std::vector<double> fitted_gamma;       // per point
  std::vector<double> quantum_efficiency; // per point
};

/// Weighted least squares of Gamma = gamma_nr + A n_g gamma_B,r with both
/// rates constrained >= 0. Throws UnidentifiableError when the n_g values
/// do not vary.
LinearFit fit_tuning_curve(std::span<const TuningPoint> points, double gamma_bulk_r = 1.0);

struct GlobalFitGroup {
  std::string label;
  std::vector<TuningPoint> points; // qd indexes 0..n_qd-1
};

/// Shared A with one gamma_nr per QD, all >= 0. Bound-active rates carry
/// at_bound in the result.
LinearFit global_fit(const GlobalFitGroup& group, double gamma_bulk_r = 1.0);

/// Lawson-Hanson non-negative least squares: min |A x - b| with x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

} // namespace slowlight
