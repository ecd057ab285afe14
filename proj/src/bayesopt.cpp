#include "rcnf/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "rcnf/errors.hpp"
#include "rcnf/gaussian_process.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {

double validation_loss(const ReservoirModel& model, const EnsembleView& train, const EnsembleView& valid,
                       std::size_t warm) {
  if (train.n_traj != valid.n_traj || train.dim != valid.dim) throw ValidationError("train/valid shapes differ");
  if (warm == 0 || warm > train.length) throw ValidationError("warm-up must be within the training segment");
  const std::size_t d = train.dim;
  std::vector<double> per(train.n_traj, 0.0);
  parallel_for(train.n_traj, [&](std::size_t m) {
    Eigen::MatrixXd w(static_cast<Eigen::Index>(warm), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < warm; ++t)
      for (std::size_t i = 0; i < d; ++i)
        w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = train(m, train.length - warm + t, i);
    try {
      const Eigen::MatrixXd path = rolling_forecast_deterministic(model, w, valid.length);
      double s = 0.0;
      for (std::size_t t = 0; t < valid.length; ++t)
        for (std::size_t i = 0; i < d; ++i) {
          const double e = path(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) - valid(m, t, i);
          s += e * e;
        }
      per[m] = s;
    } catch (const DivergenceError&) {
      per[m] = kDivergencePenalty;
    }
  });
  double total = 0.0;
  for (double v : per) total += v;
  if (!std::isfinite(total) || total > kDivergencePenalty) return kDivergencePenalty;
  return total;
}

RCHyper hyper_from_unit(const Eigen::VectorXd& u) {
  if (u.size() != 5) throw ValidationError("hyperparameter vector must have 5 entries");
  auto c = [&](Eigen::Index i) { return std::clamp(u[i], 0.0, 1.0); };
  RCHyper h;
  h.rho = 0.3 + 1.2 * c(0);
  h.k = 1 + static_cast<int>(std::lround(4.0 * c(1)));
  h.chi = 0.3 + 1.2 * c(2);
  h.alpha = 0.05 + 0.95 * c(3);
  h.lambda = std::pow(10.0, -10.0 + 10.0 * c(4));
  return h;
}

Eigen::VectorXd unit_from_hyper(const RCHyper& h) {
  Eigen::VectorXd u(5);
  u << (h.rho - 0.3) / 1.2, (h.k - 1) / 4.0, (h.chi - 0.3) / 1.2, (h.alpha - 0.05) / 0.95,
      (std::log10(h.lambda) + 10.0) / 10.0;
  return u;
}

Eigen::VectorXd snap_unit(const Eigen::VectorXd& u) {
  Eigen::VectorXd s = u.cwiseMax(0.0).cwiseMin(1.0);
  s[1] = std::round(4.0 * s[1]) / 4.0;
  return s;
}

namespace {

double model_value(double loss) { return std::log10(std::max(loss, 1e-300)); }

}  // namespace

BOMinimum bo_minimize(const std::function<double(const Eigen::VectorXd&)>& objective, std::size_t dim,
                      const BOConfig& cfg, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& snap) {
  if (dim == 0) throw ValidationError("BO dimension must be positive");
  if (cfg.n_init == 0) throw ValidationError("BO needs at least one initial design");
  if (cfg.n_candidates == 0) throw ValidationError("BO candidate pool must be non-empty");
  Engine eng = make_engine(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto feasible = [&](Eigen::VectorXd u) { return snap ? snap(u) : u; };

  BOMinimum out;
  out.best_loss = std::numeric_limits<double>::infinity();
  auto record = [&](const Eigen::VectorXd& u) {
    double loss = objective(u);
    if (!std::isfinite(loss) || loss > kDivergencePenalty) loss = kDivergencePenalty;
    out.evaluations.push_back({out.evaluations.size(), u, loss});
    if (loss < out.best_loss) {
      out.best_loss = loss;
      out.best_u = u;
    }
  };

  // Latin hypercube: one sample per stratum in every dimension, strata shuffled.
  const std::size_t n0 = cfg.n_init;
  Eigen::MatrixXd lhs(static_cast<Eigen::Index>(n0), static_cast<Eigen::Index>(dim));
  for (std::size_t j = 0; j < dim; ++j) {
    std::vector<std::size_t> perm(n0);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), eng);
    for (std::size_t i = 0; i < n0; ++i)
      lhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (static_cast<double>(perm[i]) + u01(eng)) / static_cast<double>(n0);
  }
  for (std::size_t i = 0; i < n0; ++i) record(feasible(lhs.row(static_cast<Eigen::Index>(i)).transpose()));

  for (std::size_t it = 0; it < cfg.n_iter; ++it) {
    const auto n = static_cast<Eigen::Index>(out.evaluations.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(dim));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = out.evaluations[static_cast<std::size_t>(i)].u.transpose();
      y[i] = model_value(out.evaluations[static_cast<std::size_t>(i)].loss);
    }
    const GaussianProcess gp = GaussianProcess::fit(x, y, eng, cfg.gp_starts);
    const double best = y.minCoeff();

    Eigen::VectorXd best_cand;
    double best_ei = -1.0;
    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
      Eigen::VectorXd u(static_cast<Eigen::Index>(dim));
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = u01(eng);
      u = feasible(u);
      const GPPrediction p = gp.predict(u);
      const double ei = expected_improvement(p.mean, p.variance, best);
      if (ei > best_ei) {
        best_ei = ei;
        best_cand = u;
      }
    }
    record(best_cand);
  }
  return out;
}

BOSearchResult bo_search(const std::function<double(const RCHyper&)>& objective, const BOConfig& cfg) {
  const BOMinimum m = bo_minimize([&](const Eigen::VectorXd& u) { return objective(hyper_from_unit(u)); }, 5, cfg,
                                  snap_unit);
  BOSearchResult r;
  r.best_loss = m.best_loss;
  for (const auto& e : m.evaluations) r.trace.push_back({e.iteration, hyper_from_unit(e.u), e.loss});
  if (!(m.best_loss < kDivergencePenalty)) throw NumericalError("every BO evaluation diverged");
  r.best = hyper_from_unit(m.best_u);
  return r;
}

void write_trace_csv(std::ostream& os, const std::vector<BOTraceRow>& trace) {
  os << "iteration,rho,k,chi,alpha,lambda,loss\n";
  os << std::setprecision(17);
  for (const auto& row : trace)
    os << row.iteration << ',' << row.hyper.rho << ',' << row.hyper.k << ',' << row.hyper.chi << ','
       << row.hyper.alpha << ',' << row.hyper.lambda << ',' << row.loss << '\n';
}

std::function<double(const RCHyper&)> make_rc_objective(const EnsembleView& train, const EnsembleView& valid,
                                                        std::size_t warm, std::size_t n_nodes,
                                                        std::uint64_t reservoir_seed, Variant variant) {
  return [=](const RCHyper& h) {
    try {
      ReservoirModel model = build_reservoir(h, n_nodes, train.dim, reservoir_seed, variant);
      fit_readout(model, train, warm);
      return validation_loss(model, train, valid, warm);
    } catch (const NumericalError&) {
      return kDivergencePenalty;
    }
  };
}

}  // namespace rcnf
