#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/bayesopt.hpp"
#include "rcnf/ensemble.hpp"
#include "rcnf/flow.hpp"
#include "rcnf/reservoir.hpp"

namespace rcnf {

struct RCNFModel {
  ReservoirModel reservoir;
  FlowModel flow;
  std::size_t warm = 0;
  std::optional<Scaler> data_scaler;  // forecasting runs in standardised space when set
  std::string provenance;             // JSON text

  void save(const std::string& path) const;
  static RCNFModel load(const std::string& path);
};

struct RCNFTrainConfig {
  std::size_t n_nodes = 500;
  std::size_t warm = 100;
  Variant variant = Variant::kRc;
  std::optional<RCHyper> fixed_hyper;  // skips the search when set
  BOConfig bo;
  FlowTrainConfig flow;
  bool standardize = false;
  std::uint64_t seed = 0;
};

struct RCNFTrainResult {
  RCNFModel model;
  std::optional<BOSearchResult> search;
  ReadoutDiagnostics readout;
  std::vector<double> flow_loss;
  Eigen::MatrixXd errors;  // single-step error samples the flow was trained on
};

/// Search (or take fixed) hyperparameters, refit the readout, collect single-step
/// errors and train the flow on them.
RCNFTrainResult train_rcnf(const EnsembleView& train, const EnsembleView& valid, const RCNFTrainConfig& cfg);

enum class NoiseMode { kFlow, kZero };

struct ForecastResult {
  Ensemble paths;                       // non-diverged paths only, in original units
  std::vector<std::size_t> path_index;  // source warm-up index of each kept path
  std::vector<std::size_t> diverged;    // warm-up indices whose path blew up
  std::vector<std::size_t> diverged_step;
};

/// One stochastic rolling forecast per warm-up trajectory. Each step adds an independent
/// flow sample to the one-step prediction and feeds the corrected state back. Streams are
/// derived from (seed, path index). NoiseMode::kZero gives the deterministic RC baseline.
ForecastResult forecast_ensemble(const RCNFModel& model, const EnsembleView& warmups, std::size_t horizon,
                                 std::uint64_t seed, NoiseMode noise = NoiseMode::kFlow);

/// A single generated trajectory of length n after warming up on `warmup` (rows are states).
/// Throws DivergenceError on blow-up.
Eigen::MatrixXd generate(const RCNFModel& model, const Eigen::MatrixXd& warmup, std::size_t n, std::uint64_t seed,
                         NoiseMode noise = NoiseMode::kFlow);

}  // namespace rcnf
