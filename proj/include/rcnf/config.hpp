#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rcnf/dynamics.hpp"
#include "rcnf/ensemble.hpp"
#include "rcnf/forecast.hpp"

namespace rcnf {

struct DiagnosticsConfig {
  std::size_t bins = 100;
  std::vector<double> band_levels{0.68, 0.95, 0.997};
  bool transition = false;
  std::size_t transition_paths = 10000;
  double transition_t_lo = 5.0;
  double transition_t_hi = 25.0;
  bool mle = false;
  bool close_returns = false;
  double close_scale = 1e-2;
  bool correlation = false;
  std::size_t correlation_lag = 200;
  std::size_t long_generation = 0;  // length of one long generated trajectory, 0 to skip
  std::size_t long_warm = 500;
  bool esn_contrast = false;        // also train the ESN variant and report its W2
  bool noiseless_mle = false;       // MLE of the g = 0 system
  std::size_t noiseless_length = 0;
};

struct ExperimentConfig {
  std::string system = "ou";
  std::map<std::string, double> params;  // builtin_system overrides
  SimConfig sim;
  SplitSpec split;
  std::size_t n_nodes = 500;
  Variant variant = Variant::kRc;
  std::optional<RCHyper> fixed_hyper;
  BOConfig bo;
  FlowTrainConfig flow;
  bool standardize = false;
  std::size_t forecast_paths = 0;  // 0: every test trajectory
  DiagnosticsConfig diagnostics;
  std::string scale = "custom";
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the offending field path.
  void validate() const;
  SystemSpec system_spec() const;
  RCNFTrainConfig train_config() const;
};

/// Canonical JSON text (sorted keys). Round-trips through config_from_json.
std::string config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies "a.b=c" overrides to the JSON form; values are parsed as JSON, falling back to strings.
ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides);

/// FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

/// Named presets at "desk" or "paper" scale.
ExperimentConfig preset(const std::string& name, const std::string& scale);
std::vector<std::string> preset_names();

}  // namespace rcnf
