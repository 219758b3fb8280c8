#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slowlight/error.hpp"
#include "slowlight/fitkit.hpp"
#include "slowlight/random.hpp"
#include "slowlight/tcspc.hpp"

using namespace slowlight;

namespace {

HistogramData expected_data(const DecayModel& model, const TcspcSettings& s) {
  return HistogramData::expected(expected_histogram(model, s));
}

/// Minimum over every active set of the unconstrained least-squares solutions
/// that are feasible.
Eigen::VectorXd brute_force_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto n = a.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_value = b.squaredNorm();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask & (1u << j)) idx.push_back(j);
    }
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = a.col(idx[c]);
    const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(b);
    if ((z.array() < 0.0).any()) continue;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) x[idx[c]] = z[c];
    const double v = (a * x - b).squaredNorm();
    if (v < best_value) {
      best_value = v;
      best = x;
    }
  }
  return best;
}

} // namespace

TEST_CASE("likelihood gradient and Hessian match finite differences") {
  TcspcSettings s;
  s.background_fraction = 0.05;
  s.seed = 4;
  const auto hist = simulate_histogram(DecayModel::biexponential(5.0, 1.0, 1.2, 0.6), s);
  const auto data = HistogramData::observed(hist);
  for (int k : {1, 2}) {
    const MultiExpLikelihood like(data, 0.1, k);
    Eigen::VectorXd p(like.n_params());
    if (k == 1) {
      p << 9000.0, 2.7, 6.0;
    } else {
      p << 6000.0, 4.4, 3000.0, 1.1, 5.0;
    }
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    like.evaluate(p, &g, &h);
    auto f = [&](const Eigen::VectorXd& x) { return like.evaluate(x); };
    const Eigen::VectorXd fd = oracle::fd_gradient(f, p);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-5).scale(1e-3));
      auto gi = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd gx;
        like.evaluate(x, &gx);
        return gx[i];
      };
      const Eigen::VectorXd hrow = oracle::fd_gradient(gi, p);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        CHECK(h(i, j) == doctest::Approx(hrow[j]).epsilon(1e-5).scale(1e-5));
      }
    }
  }
}

TEST_CASE("likelihood needs enough data") {
  HistogramData d;
  for (int i = 0; i <= 10; ++i) d.edges.push_back(0.1 * i);
  d.counts.assign(10, 500.0);
  CHECK_THROWS_AS(MultiExpLikelihood(d, 0.0, 1), ValidationError);
}

TEST_CASE("noise-free single exponential is recovered exactly") {
  TcspcSettings s;
  s.background_fraction = 0.02;
  const auto data = expected_data(DecayModel::single_exponential(3.9), s);
  const double t0 = default_fit_start(data);
  CHECK(t0 == doctest::Approx(data.edges[1]));
  for (auto param : {RateParameterization::Rate, RateParameterization::Lifetime}) {
    FitOptions o;
    o.parameterization = param;
    const auto fit = fit_single_exp(data, t0, o);
    CHECK(fit.converged);
    CHECK(fit.value("gamma") == doctest::Approx(3.9).epsilon(1e-8));
    CHECK(fit.value("background") == doctest::Approx(0.02 * 1e5 / 512).epsilon(1e-6));
    CHECK(fit.error("gamma") > 0.0);
    CHECK(fit.covariance.rows() == 3);
  }
}

TEST_CASE("fit errors are calibrated across seeds") {
  TcspcSettings s;
  const auto model = DecayModel::single_exponential(3.9);
  double sum = 0.0;
  double sum2 = 0.0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    s.seed = substream_seed(77, i);
    const auto hist = simulate_histogram(model, s);
    const auto fit = fit_single_exp(hist, hist.bin_edges[1]);
    const double pull = (fit.value("gamma") - 3.9) / fit.error("gamma");
    sum += pull;
    sum2 += pull * pull;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 0.3);
  CHECK(sd == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("flat histograms raise NoDecayError") {
  TcspcSettings s;
  s.seed = 3;
  s.background_fraction = 1.0;
  const auto hist = simulate_histogram(DecayModel::single_exponential(3.9), s);
  CHECK_THROWS_AS(fit_single_exp(hist, hist.bin_edges[1]), NoDecayError);
}

TEST_CASE("biexponential fit separates distinct rates and collapses otherwise") {
  TcspcSettings s;
  const auto two = expected_data(DecayModel::biexponential(6.0, 1.0, 1.0, 0.5), s);
  const auto fit = fit_biexp(two, two.edges[1]);
  REQUIRE_FALSE(fit.collapsed);
  CHECK(fit.value("gamma_fast") == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(fit.value("gamma_slow") == doctest::Approx(1.0).epsilon(1e-6));

  s.seed = 21;
  const auto one = simulate_histogram(DecayModel::single_exponential(3.9), s);
  const auto collapsed = fit_biexp(one, one.bin_edges[1]);
  CHECK(collapsed.collapsed);
  CHECK(collapsed.model == "single");
}

TEST_CASE("NNLS matches brute-force enumeration") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd a(8, 4);
    Eigen::VectorXd b(8);
    for (int i = 0; i < 8; ++i) {
      b[i] = n01(rng);
      for (int j = 0; j < 4; ++j) a(i, j) = n01(rng);
    }
    const Eigen::VectorXd x = nnls(a, b);
    const Eigen::VectorXd ref = brute_force_nnls(a, b);
    CHECK((a * x - b).squaredNorm() == doctest::Approx((a * ref - b).squaredNorm()).epsilon(1e-10));
    CHECK((x.array() >= 0.0).all());
  }
}

TEST_CASE("tuning fit recovers noiseless linear data") {
  std::vector<TuningPoint> pts;
  for (double ng : {8.0, 12.0, 20.0, 35.0}) {
    pts.push_back({10.0 / ng, 0.4 + 0.05 * ng, 0.01, ng, 0});
  }
  const auto fit = fit_tuning_curve(pts, 2.0);
  CHECK(fit.fit.value("a_gamma_br") == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(fit.coupling == doctest::Approx(0.025).epsilon(1e-10));
  CHECK(fit.fit.value("gamma_nr") == doctest::Approx(0.4).epsilon(1e-10));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double qe = 0.05 * pts[i].n_g / pts[i].gamma;
    CHECK(fit.quantum_efficiency[i] == doctest::Approx(qe).epsilon(1e-10));
    CHECK(fit.quantum_efficiency[i] >= 0.0);
    CHECK(fit.quantum_efficiency[i] <= 1.0);
  }
  std::vector<TuningPoint> flat(3, TuningPoint{1.0, 1.0, 0.1, 10.0, 0});
  CHECK_THROWS_AS(fit_tuning_curve(flat), UnidentifiableError);
  std::vector<TuningPoint> bad{{1.0, 1.0, 0.0, 10.0, 0}, {2.0, 1.0, 0.1, 5.0, 0}};
  CHECK_THROWS_AS(fit_tuning_curve(bad), ValidationError);
}

TEST_CASE("negative intercepts are clamped at zero") {
  std::vector<TuningPoint> pts;
  for (double ng : {10.0, 20.0, 30.0}) {
    pts.push_back({1.0, -0.2 + 0.1 * ng, 0.01, ng, 0});
  }
  const auto fit = fit_tuning_curve(pts);
  CHECK(fit.fit.value("gamma_nr") == 0.0);
  CHECK(fit.fit["gamma_nr"].at_bound);
}

TEST_CASE("global fit shares A across emitters") {
  GlobalFitGroup group{"test", {}};
  const double a = 0.16;
  const std::vector<double> nr{2.0, 3.0, 4.0};
  for (int q = 0; q < 3; ++q) {
    for (double ng : {26.0, 32.0, 42.0, 49.0}) {
      group.points.push_back({1.0, nr[q] + a * ng, 0.05, ng, q});
    }
  }
  const auto fit = global_fit(group);
  CHECK(fit.coupling == doctest::Approx(a).epsilon(1e-10));
  for (int q = 0; q < 3; ++q) {
    CHECK(fit.fit.value("gamma_nr[" + std::to_string(q) + "]") == doctest::Approx(nr[q]).epsilon(1e-10));
  }
  GlobalFitGroup single_points{"bad", {{1.0, 3.0, 0.1, 10.0, 0}, {1.0, 3.0, 0.1, 20.0, 1}}};
  CHECK_THROWS_AS(global_fit(single_points), UnidentifiableError);
}

TEST_CASE("n_g model is monotone and bounded") {
  PhcGeometry g;
  g.supercell_rows = 4;
  SolverSettings settings;
  settings.cutoff = 3.0;
  const auto bands = solve_bands(build_supercell(g, 16), default_k_samples(0.3, 12, 4, 0.03), 0, settings);
  const auto model = ng_model(bands, 0.0);
  double prev = model.cap();
  for (double dl = 0.01; dl < model.max_detuning(); dl += model.max_detuning() / 200.0) {
    const double ng = model(dl);
    CHECK(ng <= prev + 1e-9);
    CHECK(ng > 0.0);
    prev = ng;
  }
  CHECK(model(1e-6) == doctest::Approx(model.cap()).epsilon(1e-3));
  CHECK_THROWS_AS(model(0.0), ValidationError);
  CHECK_THROWS_AS(model(model.max_detuning() + 1.0), ValidationError);
  CHECK(model.detuning(model.band_edge_nm() - 3.0) == doctest::Approx(3.0));
  const auto shifted = ng_model(bands, 2.0);
  CHECK(shifted.detuning(shifted.band_edge_nm() - 3.0) == doctest::Approx(5.0));
}
