#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rcnf/dynamics.hpp"
#include "rcnf/errors.hpp"

namespace rcnf {
namespace {

struct Moments {
  double mean, var, se_mean, se_var;
};

Moments snapshot_moments(const Ensemble& e, std::size_t t, std::size_t i = 0) {
  const double n = static_cast<double>(e.n_traj());
  double m = 0.0;
  for (std::size_t k = 0; k < e.n_traj(); ++k) m += e(k, t, i);
  m /= n;
  double v = 0.0, m4 = 0.0;
  for (std::size_t k = 0; k < e.n_traj(); ++k) {
    double c = e(k, t, i) - m;
    v += c * c;
    m4 += c * c * c * c;
  }
  v /= n - 1;
  m4 /= n;
  return {m, v, std::sqrt(v / n), std::sqrt(std::max(m4 - v * v, 0.0) / n)};
}

TEST(BuiltinSystem, OuDefaults) {
  SystemSpec s = builtin_system("ou");
  EXPECT_EQ(s.dim, 1u);
  EXPECT_DOUBLE_EQ(s.param("b0"), 0.15);
  EXPECT_DOUBLE_EQ(s.param("mu0"), 1.0);
  EXPECT_DOUBLE_EQ(s.diffusion[0], 1.0);
  double x = 0.0, f = 0.0;
  s.drift(&x, nullptr, &f);
  EXPECT_DOUBLE_EQ(f, 0.15);
}

TEST(BuiltinSystem, LorenzIsThreeDimensional) {
  SystemSpec s = builtin_system("lorenz");
  EXPECT_EQ(s.dim, 3u);
  EXPECT_EQ(s.diffusion, (std::vector<double>{3.0, 3.0, 3.0}));
}

TEST(BuiltinSystem, OverrideEqualToDefault) {
  SystemSpec a = builtin_system("enso");
  SystemSpec b = builtin_system("enso", {{"tau0", 6.0}});
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.delay, b.delay);
  EXPECT_EQ(a.diffusion, b.diffusion);
}

TEST(BuiltinSystem, Errors) {
  EXPECT_THROW(builtin_system("nope"), ValidationError);
  EXPECT_THROW(builtin_system("ou", {{"sigma0", 1.0}}), ValidationError);
}

TEST(BuiltinSystem, AllNamesValidate) {
  for (const auto& name : builtin_system_names()) {
    SystemSpec s = builtin_system(name);
    EXPECT_NO_THROW(s.validate()) << name;
    EXPECT_EQ(default_initial_condition(s).fixed.size() + default_initial_condition(s).ranges.size(), s.dim)
        << name;
  }
}

TEST(EmStep, OuFixedPoint) {
  SystemSpec s = builtin_system("ou");
  auto out = em_step(s, {1.0}, std::nullopt, 0.01, {0.0});
  EXPECT_DOUBLE_EQ(out[0], 1.0);
}

TEST(EmStep, DoubleWellOrigin) {
  SystemSpec s = builtin_system("double_well");
  auto out = em_step(s, {0.0}, std::nullopt, 0.01, {0.02});
  EXPECT_DOUBLE_EQ(out[0], 0.01);
}

TEST(EmStep, DelayedArgumentUsed) {
  SystemSpec s = builtin_system("linear_sdde");
  auto out = em_step(s, {1.0}, std::vector<double>{0.5}, 0.1, {0.0});
  EXPECT_NEAR(out[0], 1.0 - 1.2 * 0.5 * 0.1, 1e-15);
  EXPECT_THROW(em_step(s, {1.0}, std::nullopt, 0.1, {0.0}), ValidationError);
}

TEST(EmStep, BlowUpIsAnError) {
  SystemSpec s = builtin_system("ou");
  EXPECT_THROW(em_step(s, {1.0}, std::nullopt, 0.01, {std::nan("")}), NumericalError);
  EXPECT_THROW(em_step(s, {1e13}, std::nullopt, 0.01, {0.0}), NumericalError);
}

TEST(OuClosedForm, Examples) {
  auto a = ou_closed_form(0.15, 1.0, 1.0, 0.3, 0.0);
  EXPECT_DOUBLE_EQ(a.mean, 0.3);
  EXPECT_DOUBLE_EQ(a.var, 0.0);
  auto inf = ou_closed_form(0.15, 1.0, 1.0, 0.0, 1e4);
  EXPECT_NEAR(inf.mean, 1.0, 1e-12);
  EXPECT_NEAR(inf.var, 1.0 / 0.3, 1e-12);
  auto t10 = ou_closed_form(0.15, 1.0, 1.0, 0.0, 10.0);
  EXPECT_NEAR(t10.mean, 1.0 - std::exp(-1.5), 1e-14);
  EXPECT_NEAR(t10.var, (1.0 - std::exp(-3.0)) / 0.3, 1e-14);
}

TEST(LinearSddeClosedForm, FirstInterval) {
  auto a = linear_sdde_closed_form(0.0);
  EXPECT_DOUBLE_EQ(a.mean, 1.0);
  EXPECT_DOUBLE_EQ(a.var, 0.0);
  auto b = linear_sdde_closed_form(1.0);
  EXPECT_NEAR(b.mean, 0.4, 1e-14);
  EXPECT_NEAR(b.var, 1.0, 1e-14);
  EXPECT_THROW(linear_sdde_closed_form(2.5), ValidationError);
  EXPECT_THROW(linear_sdde_closed_form(-0.1), ValidationError);
}

// Brute-force oracle on [1, 2]: X_t = X_1 - 1.2 int_0^{t-1} X_v dv + (B_t - B_1) with
// X_v = 1 - 0.6 v^2 + B_v, integrated on a fine grid from sampled Brownian paths.
TEST(LinearSddeClosedForm, SecondIntervalMatchesMonteCarlo) {
  std::mt19937_64 eng(99);
  std::normal_distribution<double> n01;
  const int n_paths = 100000, steps = 200;
  const double h = 1.0 / steps;
  double s1 = 0, s2 = 0;
  std::vector<double> b(steps + 1);
  for (int p = 0; p < n_paths; ++p) {
    b[0] = 0;
    for (int j = 1; j <= steps; ++j) b[j] = b[j - 1] + std::sqrt(h) * n01(eng);
    double integral = 0;
    for (int j = 0; j < steps; ++j) {
      double v0 = j * h, v1 = (j + 1) * h;
      integral += 0.5 * h * ((1 - 0.6 * v0 * v0 + b[j]) + (1 - 0.6 * v1 * v1 + b[j + 1]));
    }
    double x2 = (0.4 + b[steps]) - 1.2 * integral + std::sqrt(1.0) * n01(eng);
    s1 += x2;
    s2 += x2 * x2;
  }
  double mean = s1 / n_paths, var = s2 / n_paths - mean * mean;
  auto cf = linear_sdde_closed_form(2.0);
  EXPECT_NEAR(cf.mean, mean, 5 * std::sqrt(var / n_paths));
  EXPECT_NEAR(cf.var, var, 0.02);
}

TEST(Simulate, SingleStateIsInitialCondition) {
  for (const auto& name : builtin_system_names()) {
    SystemSpec s = builtin_system(name);
    SimConfig cfg;
    cfg.init = default_initial_condition(s);
    cfg.seed = 3;
    Ensemble e = simulate_ensemble(s, cfg);
    ASSERT_EQ(e.n_traj(), 1u);
    ASSERT_EQ(e.length(), 1u);
    if (cfg.init.ranges.empty())
      for (std::size_t i = 0; i < s.dim; ++i) EXPECT_EQ(e(0, 0, i), cfg.init.fixed[i]) << name;
  }
}

TEST(Simulate, Deterministic) {
  SystemSpec s = builtin_system("double_well");
  SimConfig cfg;
  cfg.n_obs = 200;
  cfg.n_traj = 16;
  cfg.init = default_initial_condition(s);
  cfg.seed = 11;
  Ensemble a = simulate_ensemble(s, cfg);
  Ensemble b = simulate_ensemble(s, cfg);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  cfg.seed = 12;
  Ensemble c = simulate_ensemble(s, cfg);
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST(Simulate, TrajectoryStreamsIndependentOfEnsembleSize) {
  SystemSpec s = builtin_system("ou");
  SimConfig cfg;
  cfg.n_obs = 50;
  cfg.n_traj = 3;
  cfg.init.fixed = {0.0};
  cfg.seed = 5;
  Ensemble small = simulate_ensemble(s, cfg);
  cfg.n_traj = 10;
  Ensemble big = simulate_ensemble(s, cfg);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(small(m, t, 0), big(m, t, 0));
}

TEST(Simulate, OuWeakConvergence) {
  SystemSpec s = builtin_system("ou");
  SimConfig cfg;
  cfg.n_obs = 2001;
  cfg.n_traj = 5000;
  cfg.init.fixed = {0.0};
  cfg.seed = 21;
  Ensemble e = simulate_ensemble(s, cfg);
  for (std::size_t t : {100u, 500u, 1000u, 2000u}) {
    auto mc = snapshot_moments(e, t);
    auto cf = ou_closed_form(0.15, 1.0, 1.0, 0.0, t * 0.01);
    EXPECT_NEAR(mc.mean, cf.mean, 5 * mc.se_mean) << "t=" << t;
    EXPECT_NEAR(mc.var, cf.var, 5 * mc.se_var) << "t=" << t;
  }
}

TEST(Simulate, LinearSddeMonteCarloAtOneAndTwo) {
  SystemSpec s = builtin_system("linear_sdde");
  SimConfig cfg;
  cfg.dt_scheme = 1e-3;
  cfg.dt_obs = 0.1;
  cfg.n_obs = 21;
  cfg.n_traj = 20000;
  cfg.init = default_initial_condition(s);
  cfg.seed = 8;
  Ensemble e = simulate_ensemble(s, cfg);
  for (std::size_t t : {10u, 20u}) {
    auto mc = snapshot_moments(e, t);
    auto cf = linear_sdde_closed_form(t * 0.1);
    EXPECT_NEAR(mc.mean, cf.mean, 5 * mc.se_mean) << "t=" << t;
    EXPECT_NEAR(mc.var, cf.var, 5 * mc.se_var) << "t=" << t;
  }
}

TEST(Simulate, NoiselessSddeFollowsDeterministicSolution) {
  SystemSpec s = builtin_system("linear_sdde", {{"g", 0.0}});
  SimConfig cfg;
  cfg.dt_scheme = 1e-3;
  cfg.dt_obs = 0.01;
  cfg.n_obs = 101;
  cfg.init = default_initial_condition(s);
  Ensemble e = simulate_ensemble(s, cfg);
  for (std::size_t t = 0; t <= 100; t += 10) {
    double tt = t * 0.01;
    EXPECT_NEAR(e(0, t, 0), 1.0 - 0.6 * tt * tt, 2e-3) << tt;
  }
}

TEST(Simulate, LorenzRecordsEveryStrideStep) {
  SystemSpec s = builtin_system("lorenz", {{"g", 0.0}});
  SimConfig cfg;
  cfg.dt_scheme = 1e-5;
  cfg.dt_obs = 0.01;
  cfg.n_obs = 3;
  cfg.init = default_initial_condition(s);
  EXPECT_EQ(cfg.stride(), 1000u);
  Ensemble e = simulate_ensemble(s, cfg);
  std::vector<double> x = cfg.init.fixed;
  for (int step = 0; step < 1000; ++step) x = em_step(s, x, std::nullopt, 1e-5, {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(e(0, 1, i), x[i], 1e-9);
}

TEST(Simulate, BlowUpNamesTrajectory) {
  SystemSpec s = builtin_system("double_well");
  SimConfig cfg;
  cfg.dt_scheme = 1.0;
  cfg.dt_obs = 1.0;
  cfg.n_obs = 50;
  cfg.n_traj = 2;
  cfg.init.fixed = {5.0};
  try {
    simulate_ensemble(s, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& err) {
    EXPECT_LT(err.trajectory(), 2u);
    EXPECT_GT(err.step(), 0u);
    EXPECT_NE(std::string(err.what()).find("trajectory"), std::string::npos);
  }
}

TEST(SimConfig, StrideValidation) {
  SimConfig cfg;
  cfg.dt_scheme = 0.003;
  cfg.dt_obs = 0.01;
  EXPECT_THROW(cfg.stride(), ValidationError);
}

}  // namespace
}  // namespace rcnf
