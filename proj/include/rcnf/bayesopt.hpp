#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/ensemble.hpp"
#include "rcnf/reservoir.hpp"

namespace rcnf {

inline constexpr double kDivergencePenalty = 1e12;

/// Sum of squared errors of deterministic rolling forecasts over the validation
/// segment, each path warmed up on the last `warm` training states. Divergent or
/// non-finite forecasts score kDivergencePenalty.
double validation_loss(const ReservoirModel& model, const EnsembleView& train, const EnsembleView& valid,
                       std::size_t warm);

struct BOConfig {
  std::size_t n_init = 10;
  std::size_t n_iter = 50;
  std::size_t n_candidates = 2048;
  std::uint64_t seed = 0;
  int gp_starts = 6;
};

struct BOEvaluation {
  std::size_t iteration;  // 0-based; the first n_init are the initial design
  Eigen::VectorXd u;      // point in the unit cube
  double loss;
};

struct BOMinimum {
  Eigen::VectorXd best_u;
  double best_loss;
  std::vector<BOEvaluation> evaluations;
};

/// GP/EI minimisation over [0, 1]^dim: Latin-hypercube initial design, then EI over
/// random candidate pools. `snap` maps a raw candidate onto the feasible set (e.g.
/// integer grids) before it is evaluated. The GP models log10 of the loss.
BOMinimum bo_minimize(const std::function<double(const Eigen::VectorXd&)>& objective, std::size_t dim,
                      const BOConfig& cfg,
                      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& snap = nullptr);

/// Box mapping between the unit cube and RCHyper (lambda on a log10 axis, k rounded).
RCHyper hyper_from_unit(const Eigen::VectorXd& u);
Eigen::VectorXd unit_from_hyper(const RCHyper& h);
Eigen::VectorXd snap_unit(const Eigen::VectorXd& u);

struct BOTraceRow {
  std::size_t iteration;
  RCHyper hyper;
  double loss;
};

struct BOSearchResult {
  RCHyper best;
  double best_loss;
  std::vector<BOTraceRow> trace;
};

/// Throws NumericalError if every evaluation hit the divergence penalty.
BOSearchResult bo_search(const std::function<double(const RCHyper&)>& objective, const BOConfig& cfg);

void write_trace_csv(std::ostream& os, const std::vector<BOTraceRow>& trace);

/// Objective used by the pipeline: build a reservoir with a fixed seed, fit the
/// readout, score validation_loss. Factorisation failures score the penalty.
std::function<double(const RCHyper&)> make_rc_objective(const EnsembleView& train, const EnsembleView& valid,
                                                        std::size_t warm, std::size_t n_nodes,
                                                        std::uint64_t reservoir_seed, Variant variant);

}  // namespace rcnf
