#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/rng.hpp"

namespace rcnf {

/// Matern-5/2 kernel with one length-scale per input dimension.
struct GPHyper {
  Eigen::VectorXd length_scales;
  double signal_var = 1.0;
  double noise_var = 1e-6;
};

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GPHyper& hp);

struct GPPrediction {
  double mean;
  double variance;
};

/// GP regression on inputs in the unit cube. Observations are standardised
/// internally; predictions are returned in the original units.
class GaussianProcess {
 public:
  /// Factorises with the given hyperparameters. Jitter is escalated up to 1e-4 * signal_var
  /// if the kernel matrix is not numerically positive definite; beyond that NumericalError.
  GaussianProcess(Eigen::MatrixXd x, Eigen::VectorXd y, GPHyper hp);

  /// Fits length-scales and variances by maximising the log marginal likelihood
  /// (multi-start Nelder-Mead in log space), then factorises.
  static GaussianProcess fit(Eigen::MatrixXd x, Eigen::VectorXd y, Engine& eng, int n_starts = 6);

  GPPrediction predict(const Eigen::VectorXd& q) const;
  double log_marginal_likelihood() const { return lml_; }
  const GPHyper& hyper() const { return hp_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;  // standardised
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  GPHyper hp_;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

/// log p(y | x, hp) for already-standardised y; returns -inf if no jitter level factorises.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPHyper& hp);

/// Expected improvement for minimisation.
double expected_improvement(double mean, double variance, double best);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value;
};

/// Plain Nelder-Mead minimiser (used for GP hyperparameters).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             double step, int max_evals, double ftol = 1e-9);

}  // namespace rcnf
