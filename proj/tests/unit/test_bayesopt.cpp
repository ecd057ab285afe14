#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "rcnf/bayesopt.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/gaussian_process.hpp"

namespace rcnf {
namespace {

double matern_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GPHyper& hp) {
  double r2 = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) r2 += std::pow((a[i] - b[i]) / hp.length_scales[i], 2);
  double r = std::sqrt(r2);
  return hp.signal_var * (1 + std::sqrt(5.0) * r + 5.0 * r2 / 3.0) * std::exp(-std::sqrt(5.0) * r);
}

GPHyper hyper(Eigen::Index dim, double ls, double sv, double nv) {
  GPHyper hp;
  hp.length_scales = Eigen::VectorXd::Constant(dim, ls);
  hp.signal_var = sv;
  hp.noise_var = nv;
  return hp;
}

TEST(GaussianProcess, MatchesDenseFormula) {
  Eigen::MatrixXd x(5, 2);
  x << 0.1, 0.2, 0.8, 0.4, 0.5, 0.9, 0.3, 0.6, 0.95, 0.05;
  Eigen::VectorXd y(5);
  y << 1.0, -0.5, 2.0, 0.3, 1.7;
  GPHyper hp = hyper(2, 0.4, 1.3, 1e-4);
  GaussianProcess gp(x, y, hp);
  ASSERT_EQ(gp.jitter(), 0.0);

  const double ym = y.mean();
  const double ysd = std::sqrt((y.array() - ym).square().mean());
  Eigen::VectorXd yz = (y.array() - ym) / ysd;
  Eigen::MatrixXd k(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) k(i, j) = matern_oracle(x.row(i), x.row(j), hp) + (i == j ? hp.noise_var : 0.0);
  Eigen::MatrixXd kinv = k.inverse();
  for (Eigen::Vector2d q : {Eigen::Vector2d(0.4, 0.4), Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.8, 0.41)}) {
    Eigen::VectorXd ks(5);
    for (int i = 0; i < 5; ++i) ks[i] = matern_oracle(x.row(i), q, hp);
    double mean = ym + ysd * ks.dot(kinv * yz);
    double var = ysd * ysd * (hp.signal_var - ks.dot(kinv * ks));
    GPPrediction p = gp.predict(q);
    EXPECT_NEAR(p.mean, mean, 1e-8);
    EXPECT_NEAR(p.variance, var, 1e-8);
    EXPECT_GE(p.variance, -1e-12);
  }
  EXPECT_NEAR(matern52(x.row(0), x.row(1), hp), matern_oracle(x.row(0), x.row(1), hp), 1e-14);
}

TEST(GaussianProcess, InterpolatesWithTinyNoise) {
  Eigen::MatrixXd x(3, 1);
  x << 0.1, 0.5, 0.9;
  Eigen::VectorXd y(3);
  y << 3.0, 1.0, 2.0;
  GaussianProcess gp(x, y, hyper(1, 0.3, 1.0, 1e-10));
  for (int i = 0; i < 3; ++i) {
    GPPrediction p = gp.predict(x.row(i).transpose());
    EXPECT_NEAR(p.mean, y[i], 1e-5);
    EXPECT_LT(p.variance, 1e-6);
  }
}

TEST(GaussianProcess, FarQueryRevertsToPrior) {
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  Eigen::VectorXd y(1);
  y << 4.2;
  GaussianProcess gp(x, y, hyper(1, 0.05, 2.0, 1e-6));
  GPPrediction p = gp.predict(Eigen::VectorXd::Constant(1, 50.0));
  EXPECT_NEAR(p.mean, 4.2, 1e-12);
  EXPECT_NEAR(p.variance, 2.0, 1e-9);
}

TEST(GaussianProcess, FitImprovesLikelihood) {
  Engine eng = make_engine(3);
  Eigen::MatrixXd x(12, 1);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = i / 11.0;
    y[i] = std::sin(6 * x(i, 0));
  }
  GaussianProcess fit = GaussianProcess::fit(x, y, eng);
  GaussianProcess fixed(x, y, hyper(1, 0.01, 1.0, 0.5));
  EXPECT_GE(fit.log_marginal_likelihood(), fixed.log_marginal_likelihood());
  EXPECT_NEAR(fit.predict(Eigen::VectorXd::Constant(1, 0.45)).mean, std::sin(2.7), 0.1);
}

TEST(ExpectedImprovement, ClosedForms) {
  EXPECT_EQ(expected_improvement(1.0, 0.0, 0.5), 0.0);
  EXPECT_EQ(expected_improvement(0.5, 0.0, 0.5), 0.0);
  EXPECT_NEAR(expected_improvement(0.0, 1.0, 0.0), 1.0 / std::sqrt(2 * M_PI), 1e-12);
  EXPECT_NEAR(expected_improvement(0.2, 1e-30, 0.5), 0.3, 1e-12);
  for (double m : {-2.0, 0.0, 3.0}) EXPECT_GE(expected_improvement(m, 0.7, 0.1), 0.0);
}

TEST(NelderMead, Rosenbrock) {
  auto f = [](const Eigen::VectorXd& v) { return std::pow(1 - v[0], 2) + 100 * std::pow(v[1] - v[0] * v[0], 2); };
  NelderMeadResult r = nelder_mead(f, Eigen::Vector2d(-1.2, 1.0), 0.5, 4000, 1e-14);
  EXPECT_NEAR(r.x[0], 1.0, 1e-3);
  EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(BoMinimize, QuadraticToy) {
  const double target = 0.37;
  auto f = [&](const Eigen::VectorXd& u) { return std::pow(u[0] - target, 2); };
  // Grid-search oracle for the minimiser.
  double best_grid = 0, best_val = 1e9;
  for (int i = 0; i <= 10000; ++i) {
    double u = i / 10000.0;
    if (f(Eigen::VectorXd::Constant(1, u)) < best_val) best_val = f(Eigen::VectorXd::Constant(1, best_grid = u));
  }
  BOConfig cfg;
  cfg.n_init = 5;
  cfg.n_iter = 15;
  cfg.seed = 2;
  BOMinimum r = bo_minimize(f, 1, cfg);
  EXPECT_NEAR(r.best_u[0], best_grid, 0.05 * best_grid);
  EXPECT_EQ(r.evaluations.size(), 20u);
  double running = std::numeric_limits<double>::infinity();
  for (const auto& ev : r.evaluations) running = std::min(running, ev.loss);
  EXPECT_EQ(running, r.best_loss);
}

TEST(BoMinimize, NoIterationsIsBestInitialDesign) {
  auto f = [](const Eigen::VectorXd& u) { return u.squaredNorm(); };
  BOConfig cfg;
  cfg.n_init = 7;
  cfg.n_iter = 0;
  BOMinimum r = bo_minimize(f, 3, cfg);
  ASSERT_EQ(r.evaluations.size(), 7u);
  double best = 1e9;
  for (const auto& ev : r.evaluations) best = std::min(best, ev.loss);
  EXPECT_EQ(r.best_loss, best);
}

TEST(BoMinimize, Deterministic) {
  auto f = [](const Eigen::VectorXd& u) { return std::abs(u[0] - 0.2) + std::abs(u[1] - 0.8); };
  BOConfig cfg;
  cfg.n_init = 4;
  cfg.n_iter = 4;
  cfg.seed = 9;
  BOMinimum a = bo_minimize(f, 2, cfg), b = bo_minimize(f, 2, cfg);
  for (std::size_t i = 0; i < a.evaluations.size(); ++i) EXPECT_EQ(a.evaluations[i].u, b.evaluations[i].u);
}

TEST(HyperBox, MappingAndSnap) {
  RCHyper lo = hyper_from_unit(Eigen::VectorXd::Zero(5));
  RCHyper hi = hyper_from_unit(Eigen::VectorXd::Ones(5));
  EXPECT_DOUBLE_EQ(lo.rho, 0.3);
  EXPECT_DOUBLE_EQ(hi.rho, 1.5);
  EXPECT_EQ(lo.k, 1);
  EXPECT_EQ(hi.k, 5);
  EXPECT_DOUBLE_EQ(lo.alpha, 0.05);
  EXPECT_DOUBLE_EQ(hi.alpha, 1.0);
  EXPECT_NEAR(lo.lambda, 1e-10, 1e-22);
  EXPECT_NEAR(hi.lambda, 1.0, 1e-12);
  RCHyper h{0.9, 4, 1.1, 0.3, 1e-5};
  RCHyper back = hyper_from_unit(unit_from_hyper(h));
  EXPECT_NEAR(back.rho, h.rho, 1e-12);
  EXPECT_EQ(back.k, h.k);
  EXPECT_NEAR(back.lambda, h.lambda, 1e-15);
  Eigen::VectorXd u(5);
  u << 0.1, 0.3, 0.5, 0.7, 0.9;
  Eigen::VectorXd s = snap_unit(u);
  EXPECT_EQ(hyper_from_unit(s).k, hyper_from_unit(u).k);
  EXPECT_NEAR(4.0 * s[1], std::round(4.0 * s[1]), 1e-12);
}

TEST(BoSearch, ProposalsInsideBoxAndRunningMinimum) {
  BOConfig cfg;
  cfg.n_init = 6;
  cfg.n_iter = 6;
  cfg.seed = 4;
  auto obj = [](const RCHyper& h) { return std::pow(h.rho - 0.9, 2) + std::pow(std::log10(h.lambda) + 5, 2) + h.k; };
  BOSearchResult r = bo_search(obj, cfg);
  ASSERT_EQ(r.trace.size(), 12u);
  for (const auto& row : r.trace) EXPECT_NO_THROW(row.hyper.validate_ranges());
  double best = 1e300;
  for (const auto& row : r.trace) best = std::min(best, row.loss);
  EXPECT_EQ(best, r.best_loss);
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iteration,rho,k,chi,alpha,lambda,loss");
}

TEST(BoSearch, AllDivergedIsAnError) {
  BOConfig cfg;
  cfg.n_init = 3;
  cfg.n_iter = 2;
  EXPECT_THROW(bo_search([](const RCHyper&) { return kDivergencePenalty; }, cfg), NumericalError);
}

Ensemble constant_ensemble(std::size_t m, std::size_t l) {
  Ensemble e(m, l, 1, 0.01);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t t = 0; t < l; ++t) e(k, t, 0) = 0.1 * static_cast<double>(k) - 0.2;
  return e;
}

ReservoirModel selecting_model(double coef) {
  ReservoirModel m = build_reservoir(RCHyper{}, 10, 1, 1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, 12);
  w(0, 1) = coef;
  m.set_w_out(w);
  return m;
}

TEST(ValidationLoss, PerfectZeroAndDiverged) {
  Ensemble e = constant_ensemble(4, 60);
  SplitViews v = split(e, {50, 10, 0, 5});
  EXPECT_EQ(validation_loss(selecting_model(1.0), v.train, v.valid, 5), 0.0);
  EXPECT_EQ(validation_loss(selecting_model(1e3), v.train, v.valid, 5), kDivergencePenalty);

  Ensemble noise(50, 120, 1, 0.01);
  Engine eng = make_engine(5);
  fill_standard_normal(eng, noise.data());
  SplitViews w = split(noise, {100, 20, 0, 10});
  double loss = validation_loss(selecting_model(0.0), w.train, w.valid, 10);
  EXPECT_NEAR(loss, 50.0 * 20.0, 5 * std::sqrt(2.0 * 1000.0));
}

}  // namespace
}  // namespace rcnf
