#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rcnf/diagnostics.hpp"
#include "rcnf/dynamics.hpp"
#include "rcnf/errors.hpp"
#include "oracles.hpp"

namespace rcnf {
namespace {

using oracles::brute_force_w2;

std::vector<double> normal_samples(std::size_t n, double mu, double sd, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d(mu, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(eng);
  return v;
}

double permutation_w2(const std::vector<double>& a, std::vector<double> b) {
  std::sort(b.begin(), b.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    best = std::min(best, s);
  } while (std::next_permutation(b.begin(), b.end()));
  return std::sqrt(best / static_cast<double>(a.size()));
}

TEST(Wasserstein, IdentityAndSymmetry) {
  auto a = normal_samples(300, 0, 1, 1), b = normal_samples(217, 0.5, 2, 2);
  EXPECT_EQ(wasserstein2_1d(a, a), 0.0);
  EXPECT_NEAR(wasserstein2_1d(a, b), wasserstein2_1d(b, a), 1e-14);
  EXPECT_THROW(wasserstein2_1d({}, a), ValidationError);
}

TEST(Wasserstein, MatchesPermutationOracle) {
  std::mt19937_64 eng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 2 + trial % 6;
    auto a = normal_samples(n, 0, 1, 10 + trial), b = normal_samples(n, 0.3, 1.5, 40 + trial);
    EXPECT_NEAR(wasserstein2_1d(a, b), permutation_w2(a, b), 1e-12);
  }
}

TEST(Wasserstein, MatchesTransportOracleUpToTwentyPoints) {
  for (auto [n, m] : std::vector<std::pair<int, int>>{{20, 20}, {4, 5}, {3, 7}, {2, 9}, {1, 13}, {5, 4}, {6, 3}}) {
    auto a = normal_samples(n, 0, 1, 100 + n * m), b = normal_samples(m, -0.4, 0.7, 200 + n * m);
    EXPECT_NEAR(wasserstein2_1d(a, b), brute_force_w2(a, b), 1e-12) << n << "x" << m;
  }
}

TEST(Wasserstein, GaussianShift) {
  auto a = normal_samples(100000, 0, 1, 5), b = normal_samples(100000, 2, 1, 6);
  EXPECT_NEAR(wasserstein2_1d(a, b), 2.0, 0.03);
  Eigen::MatrixXd ma(100000, 2), mb(100000, 2);
  for (int i = 0; i < 100000; ++i) {
    ma(i, 0) = a[i];
    mb(i, 0) = b[i];
    ma(i, 1) = mb(i, 1) = 0.0;
  }
  EXPECT_NEAR(wasserstein2(ma, mb), wasserstein2_1d(a, b) / 2.0, 1e-12);
}

TEST(KlDivergence, IdentityAndGaussianOracle) {
  auto a = normal_samples(100000, 0, 1, 7);
  EXPECT_LE(kl_divergence_1d(a, a), 1e-12);
  auto b = normal_samples(100000, 0, 2, 8);
  const double closed = 0.5 * (std::log(4.0) + 0.25 - 1.0);
  EXPECT_NEAR(kl_divergence_1d(a, b), closed, 0.05);
  EXPECT_GE(kl_divergence_1d(b, a), 0.0);
  EXPECT_EQ(kl_divergence_1d({1.0, 1.0}, {1.0}), 0.0);
}

TEST(SnapshotMetrics, PerTimeValues) {
  Ensemble f(50, 3, 1, 0.1, 2.0), r(40, 3, 1, 0.1, 2.0);
  for (std::size_t m = 0; m < 50; ++m)
    for (std::size_t t = 0; t < 3; ++t) f(m, t, 0) = static_cast<double>(m) / 50.0 + t;
  for (std::size_t m = 0; m < 40; ++m)
    for (std::size_t t = 0; t < 3; ++t) r(m, t, 0) = static_cast<double>(m) / 40.0;
  auto s = snapshot_metrics(f, r);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s[1].time, 2.1);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(s[t].w2, wasserstein2_1d(f.view().snapshot(t, 0), r.view().snapshot(t, 0)), 1e-15);
    EXPECT_GE(s[t].kl, 0.0);
  }
  EXPECT_NEAR(mean_w2(s), (s[0].w2 + s[1].w2 + s[2].w2) / 3, 1e-15);
}

TEST(QuantileBands, ConstantAndSingleLevel) {
  Ensemble e(12, 4, 1, 0.01);
  for (double& x : e.data()) x = 3.0;
  QuantileBands b = quantile_bands(e, {0.68});
  ASSERT_EQ(b.lower.size(), 1u);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(b.upper[0][c] - b.lower[0][c], 0.0);
    EXPECT_EQ(b.median[c], 3.0);
  }
  Ensemble small(9, 4, 1, 0.01);
  EXPECT_THROW(quantile_bands(small), ValidationError);
}

TEST(QuantileBands, OuThreeSigma) {
  SystemSpec s = builtin_system("ou");
  SimConfig cfg;
  cfg.n_obs = 1001;
  cfg.n_traj = 4000;
  cfg.init.fixed = {0.0};
  cfg.seed = 2;
  Ensemble e = simulate_ensemble(s, cfg);
  QuantileBands b = quantile_bands(e);
  const double z[3] = {0.994457883, 1.959963985, 2.967737925};
  for (std::size_t t : {200u, 1000u}) {
    auto cf = ou_closed_form(0.15, 1.0, 1.0, 0.0, t * 0.01);
    const double sd = std::sqrt(cf.var);
    EXPECT_NEAR(b.mean[t], cf.mean, 5 * sd / std::sqrt(4000.0));
    const double tol[3] = {0.08, 0.12, 0.35};
    for (int l = 0; l < 3; ++l) {
      EXPECT_NEAR(b.lower[l][t], cf.mean - z[l] * sd, tol[l] * sd);
      EXPECT_NEAR(b.upper[l][t], cf.mean + z[l] * sd, tol[l] * sd);
    }
  }
}

TEST(SortedQuantile, Interpolates) {
  std::vector<double> v{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.5), 1.5);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 1.0), 3.0);
}

Ensemble two_state_ensemble(std::size_t m, std::size_t l, double p_switch, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::bernoulli_distribution flip(p_switch);
  Ensemble e(m, l, 1, 0.1);
  for (std::size_t k = 0; k < m; ++k) {
    double x = k % 3 == 0 ? 1.0 : -1.0;
    for (std::size_t t = 0; t < l; ++t) {
      if (t > 0 && flip(eng)) x = -x;
      e(k, t, 0) = x;
    }
  }
  return e;
}

TEST(TransitionRate, ReorderInvariant) {
  Ensemble e = two_state_ensemble(600, 300, 0.002, 4);
  RateFit a = transition_rate(e, Region::kA);
  std::vector<std::size_t> perm(600);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  Ensemble shuffled(600, 300, 1, 0.1);
  for (std::size_t k = 0; k < 600; ++k)
    for (std::size_t t = 0; t < 300; ++t) shuffled(k, t, 0) = e(perm[k], t, 0);
  RateFit b = transition_rate(shuffled, Region::kA);
  EXPECT_EQ(a.slope, b.slope);
  EXPECT_EQ(a.intercept, b.intercept);
  EXPECT_EQ(a.n_start, 400u);
  EXPECT_GT(a.slope, 0.0);
  RateFit c = transition_rate(e, Region::kB);
  EXPECT_EQ(c.n_start, 200u);
}

TEST(TransitionRate, LinearOracle) {
  // Ratio curve exactly 0.01 t for the B-hits: trajectory k enters B at time index 10 k.
  Ensemble e(100, 301, 1, 0.1);
  for (std::size_t k = 0; k < 100; ++k)
    for (std::size_t t = 0; t <= 300; ++t) e(k, t, 0) = (k > 0 && t >= 10 * k) ? 1.0 : -1.0;
  RateFit f = transition_rate(e, Region::kA, 5.0, 25.0);
  EXPECT_NEAR(f.slope, 0.01, 1e-3);
  EXPECT_EQ(f.times.size(), 301u);
}

TEST(TransitionRate, ConfinedToA) {
  Ensemble e(20, 300, 1, 0.1);
  for (double& x : e.data()) x = -1.0;
  RateFit f = transition_rate(e, Region::kA);
  EXPECT_EQ(f.slope, 0.0);
  for (double r : f.ratio) EXPECT_EQ(r, 0.0);
  EXPECT_THROW(transition_rate(e, Region::kB), ValidationError);
  Ensemble short_e(20, 100, 1, 0.1);
  EXPECT_THROW(transition_rate(short_e, Region::kA), ValidationError);
}

TEST(Lyapunov, PeriodicIsNonChaotic) {
  const int n = 10000;
  Eigen::MatrixXd traj(n, 2);
  for (int t = 0; t < n; ++t) {
    traj(t, 0) = std::sin(0.01 * t);
    traj(t, 1) = std::cos(0.01 * t);
  }
  LyapunovResult r = max_lyapunov(traj, 0.01);
  EXPECT_LE(r.exponent, 0.05);
  EXPECT_GT(r.min_separation, 0u);
}

TEST(Lyapunov, NoiselessLorenz) {
  SystemSpec s = builtin_system("lorenz", {{"g", 0.0}});
  SimConfig cfg;
  cfg.dt_scheme = 1e-4;
  cfg.n_obs = 6000;
  cfg.init = default_initial_condition(s);
  Ensemble e = simulate_ensemble(s, cfg);
  Eigen::MatrixXd traj(5000, 3);
  for (int t = 0; t < 5000; ++t)
    for (int i = 0; i < 3; ++i) traj(t, i) = e(0, 1000 + t, i);
  LyapunovResult r = max_lyapunov(traj, 0.01);
  EXPECT_NEAR(r.exponent, 0.91, 0.1);
}

TEST(Lyapunov, FitWindowSkipsAlignmentPhase) {
  SystemSpec s = builtin_system("lorenz", {{"g", 0.0}});
  SimConfig cfg;
  cfg.dt_scheme = 1e-4;
  cfg.n_obs = 21000;
  cfg.init.fixed = {3.0, -2.0, 23.0};
  Ensemble e = simulate_ensemble(s, cfg);
  Eigen::MatrixXd traj(20000, 3);
  for (int t = 0; t < 20000; ++t)
    for (int i = 0; i < 3; ++i) traj(t, i) = e(0, 1000 + t, i);
  LyapunovConfig lc;
  lc.horizon = 1000;
  lc.fit_begin = 0.05;
  lc.fit_fraction = 0.3;
  LyapunovResult r = max_lyapunov(traj, 0.01, lc);
  EXPECT_NEAR(r.exponent, 0.91, 0.15);
  // The windowed slope equals a least-squares fit over exactly those steps.
  std::vector<double> x, y;
  for (std::size_t k = 50; k < 300; ++k) {
    x.push_back(0.01 * static_cast<double>(k));
    y.push_back(r.mean_log_divergence[k]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  EXPECT_NEAR(r.exponent, sxy / sxx, 1e-10);
}

TEST(CloseReturns, PeriodicPeaksAndErrors) {
  const int period = 50, n = 2000;
  Eigen::MatrixXd traj(n, 2);
  for (int t = 0; t < n; ++t) {
    traj(t, 0) = std::sin(2 * M_PI * t / period);
    traj(t, 1) = std::cos(2 * M_PI * t / period);
  }
  CloseReturnsMap m = close_returns(traj, 1e-2, 1000, 900);
  EXPECT_EQ(m.n_t, 1000u);
  EXPECT_EQ(m.n_p, 900u);
  for (std::size_t p = 1; p <= 900; ++p) {
    if (p % period == 0)
      EXPECT_EQ(m.histogram[p - 1], 1000u) << p;
    else
      EXPECT_EQ(m.histogram[p - 1], 0u) << p;
  }
  EXPECT_THROW(close_returns(Eigen::MatrixXd::Constant(2000, 2, 1.0)), ValidationError);
}

TEST(CloseReturns, TimeReversalSymmetry) {
  std::mt19937_64 eng(1);
  std::normal_distribution<double> n01;
  const int n = 600;
  Eigen::MatrixXd traj(n, 2);
  for (int t = 0; t < n; ++t) {
    traj(t, 0) = std::sin(0.3 * t) + 0.05 * n01(eng);
    traj(t, 1) = std::cos(0.3 * t) + 0.05 * n01(eng);
  }
  const std::size_t tm = 300, pm = 299;
  CloseReturnsMap fwd = close_returns(traj, 0.05, tm, pm);
  CloseReturnsMap rev = close_returns(traj.colwise().reverse(), 0.05, tm, pm);
  // Pixel (t, p) pairs X_t with X_{t+p}; in the reversed series that pair sits at (L-1-t-p, p).
  std::size_t checked = 0;
  for (std::size_t t = 0; t < fwd.n_t; ++t)
    for (std::size_t p = 1; p <= pm; ++p) {
      std::size_t tr = n - 1 - t - p;
      if (tr >= rev.n_t) continue;
      EXPECT_EQ(fwd.at(t, p), rev.at(tr, p));
      ++checked;
    }
  EXPECT_GT(checked, 1000u);
}

TEST(Correlation, WhiteNoise) {
  const int n = 20000;
  Eigen::MatrixXd x(n, 1);
  auto v = normal_samples(n, 0, 1, 9);
  for (int i = 0; i < n; ++i) x(i, 0) = v[i];
  auto r = acf_ccf(x, 20);
  EXPECT_NEAR(r[0][0], 1.0, 1e-10);
  for (std::size_t p = 1; p <= 20; ++p) EXPECT_LT(std::abs(r[0][p]), 3.0 / std::sqrt(double(n)));
}

TEST(Correlation, Ar1OracleAndLagZero) {
  const int n = 100000;
  Eigen::MatrixXd x(n, 2);
  auto noise = normal_samples(2 * n, 0, 1, 10);
  x(0, 0) = 0;
  for (int t = 1; t < n; ++t) x(t, 0) = 0.9 * x(t - 1, 0) + noise[t];
  for (int t = 0; t < n; ++t) x(t, 1) = 5.0 + 3.0 * noise[n + t] + 0.2 * x(t, 0);
  auto r = acf_ccf(x, 30);
  for (std::size_t p = 0; p <= 30; ++p) EXPECT_NEAR(r[0][p], std::pow(0.9, double(p)), 0.05) << p;
  EXPECT_NEAR(r[0][0], 1.0, 1e-10);
  EXPECT_NEAR(r[3][0], 1.0, 1e-10);
  EXPECT_NE(r[1][5], r[2][5]);
  EXPECT_THROW(acf_ccf(Eigen::MatrixXd::Ones(100, 1), 5), ValidationError);
  EXPECT_THROW(acf_ccf(x.topRows(10), 10), ValidationError);
  auto printed = acf_ccf(x, 3, CorrelationNorm::kSqrtStdProduct);
  EXPECT_GT(std::abs(printed[3][0] - 1.0), 1e-3);
}

TEST(Correlation, FirstZeroCrossing) {
  EXPECT_EQ(first_zero_crossing({1.0, 0.5, 0.1, -0.2, 0.3}), 3u);
}

TEST(Density, GridIntegratesToOne) {
  auto x = normal_samples(10000, 0, 1, 11);
  DensityGrid g = density_grid(x, 50, -4, 4);
  double s = 0;
  for (double d : g.density) s += d * (8.0 / 50);
  EXPECT_NEAR(s, 1.0, 1e-3);
  EXPECT_EQ(g.centers.size(), 50u);
}

}  // namespace
}  // namespace rcnf
