#include "rcnf/gaussian_process.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rcnf/errors.hpp"

namespace rcnf {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const GPHyper& hp) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = matern52(x.row(i), x.row(j), hp);
  return k;
}

// Smallest jitter from the ladder that makes K + (noise + jitter) I factorise.
bool factorise(const Eigen::MatrixXd& k, const GPHyper& hp, Eigen::LLT<Eigen::MatrixXd>& llt, double& jitter) {
  static constexpr double kLadder[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
  for (double rel : kLadder) {
    jitter = rel * hp.signal_var;
    Eigen::MatrixXd m = k;
    m.diagonal().array() += hp.noise_var + jitter;
    llt.compute(m);
    if (llt.info() == Eigen::Success) return true;
  }
  return false;
}

}  // namespace

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GPHyper& hp) {
  const double r = ((a - b).array() / hp.length_scales.array()).matrix().norm();
  const double s = std::sqrt(5.0) * r;
  return hp.signal_var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPHyper& hp) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0;
  if (!factorise(kernel_matrix(x, hp), hp, llt, jitter)) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

GaussianProcess::GaussianProcess(Eigen::MatrixXd x, Eigen::VectorXd y, GPHyper hp)
    : x_(std::move(x)), hp_(std::move(hp)) {
  if (x_.rows() == 0 || x_.rows() != y.size()) throw ValidationError("GP needs at least one observation");
  if (hp_.length_scales.size() != x_.cols()) throw ValidationError("GP length-scale count must match input dimension");
  y_mean_ = y.mean();
  const double var = (y.array() - y_mean_).square().mean();
  y_std_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  y_ = (y.array() - y_mean_) / y_std_;
  if (!factorise(kernel_matrix(x_, hp_), hp_, llt_, jitter_))
    throw NumericalError("GP kernel matrix is not positive definite even with jitter");
  alpha_ = llt_.solve(y_);
  const double logdet = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  lml_ = -0.5 * y_.dot(alpha_) - 0.5 * logdet - 0.5 * static_cast<double>(y_.size()) * kLog2Pi;
}

GPPrediction GaussianProcess::predict(const Eigen::VectorXd& q) const {
  if (q.size() != x_.cols()) throw ValidationError("GP query dimension mismatch");
  Eigen::VectorXd ks(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) ks[i] = matern52(x_.row(i), q, hp_);
  const double mean = ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  double var = hp_.signal_var - v.squaredNorm();
  if (var < 0) var = 0;  // round-off only; the exact value is non-negative
  return {mean * y_std_ + y_mean_, var * y_std_ * y_std_};
}

GaussianProcess GaussianProcess::fit(Eigen::MatrixXd x, Eigen::VectorXd y, Engine& eng, int n_starts) {
  if (x.rows() == 0 || x.rows() != y.size()) throw ValidationError("GP needs at least one observation");
  const Eigen::Index dim = x.cols();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  const Eigen::VectorXd ys = (y.array() - mean) / (var > 1e-24 ? std::sqrt(var) : 1.0);

  // theta = (log l_1..l_D, log s2, log noise), clamped to a box.
  const double lo_l = std::log(1e-2), hi_l = std::log(1e1);
  const double lo_s = std::log(1e-2), hi_s = std::log(1e2);
  const double lo_n = std::log(1e-8), hi_n = std::log(1.0);
  auto unpack = [&](const Eigen::VectorXd& th) {
    GPHyper hp;
    hp.length_scales.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) hp.length_scales[i] = std::exp(std::clamp(th[i], lo_l, hi_l));
    hp.signal_var = std::exp(std::clamp(th[dim], lo_s, hi_s));
    hp.noise_var = std::exp(std::clamp(th[dim + 1], lo_n, hi_n));
    return hp;
  };
  auto objective = [&](const Eigen::VectorXd& th) {
    const double v = gp_log_marginal_likelihood(x, ys, unpack(th));
    return std::isfinite(v) ? -v : 1e300;
  };

  std::uniform_real_distribution<double> ul(std::log(0.05), std::log(2.0));
  std::uniform_real_distribution<double> us(std::log(0.3), std::log(3.0));
  std::uniform_real_distribution<double> un(std::log(1e-6), std::log(1e-2));
  Eigen::VectorXd best_theta;
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, n_starts); ++s) {
    Eigen::VectorXd th(dim + 2);
    if (s == 0) {
      th.head(dim).setConstant(std::log(0.3));
      th[dim] = 0.0;
      th[dim + 1] = std::log(1e-4);
    } else {
      for (Eigen::Index i = 0; i < dim; ++i) th[i] = ul(eng);
      th[dim] = us(eng);
      th[dim + 1] = un(eng);
    }
    const NelderMeadResult r = nelder_mead(objective, th, 0.5, 100 * static_cast<int>(dim + 2));
    if (r.value < best) {
      best = r.value;
      best_theta = r.x;
    }
  }
  return GaussianProcess(std::move(x), std::move(y), unpack(best_theta));
}

double expected_improvement(double mean, double variance, double best) {
  const double sigma = std::sqrt(std::max(variance, 0.0));
  const double gain = best - mean;
  if (sigma < 1e-300) return std::max(gain, 0.0);
  const double z = gain / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(0.0, gain * cdf + sigma * pdf);
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             double step, int max_evals, double ftol) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)][i] += step;
  int evals = 0;
  for (std::size_t i = 0; i < pts.size(); ++i, ++evals) vals[i] = f(pts[i]);

  std::vector<std::size_t> order(pts.size());
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t ib = order.front(), iw = order.back(), is = order[order.size() - 2];
    if (std::abs(vals[iw] - vals[ib]) <= ftol * (std::abs(vals[ib]) + 1e-12)) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != iw) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[iw]);
    const double fr = f(xr);
    ++evals;
    if (fr < vals[ib]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[iw]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[iw] = xe;
        vals[iw] = fe;
      } else {
        pts[iw] = xr;
        vals[iw] = fr;
      }
      continue;
    }
    if (fr < vals[is]) {
      pts[iw] = xr;
      vals[iw] = fr;
      continue;
    }
    const bool outside = fr < vals[iw];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[iw] - centroid));
    const double fc = f(xc);
    ++evals;
    if (fc < (outside ? fr : vals[iw])) {
      pts[iw] = xc;
      vals[iw] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == ib) continue;
      pts[i] = pts[ib] + 0.5 * (pts[i] - pts[ib]);
      vals[i] = f(pts[i]);
      ++evals;
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best]};
}

}  // namespace rcnf
