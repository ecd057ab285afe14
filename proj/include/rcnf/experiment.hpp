#pragma once

#include <functional>
#include <optional>
#include <string>

#include "rcnf/config.hpp"
#include "rcnf/diagnostics.hpp"
#include "rcnf/forecast.hpp"

namespace rcnf {

using Logger = std::function<void(const std::string&)>;

/// Master-seed sub-streams.
std::uint64_t stream_seed(const ExperimentConfig& c, const char* name);

/// The configured ensemble, stamped with system, seed and config hash.
Ensemble simulate_data(const ExperimentConfig& c);

/// Hyperparameter search on the train/valid split (with the configured scaler).
BOSearchResult search_hyper(const ExperimentConfig& c, const EnsembleView& data);

RCNFTrainResult train_model(const ExperimentConfig& c, const EnsembleView& data);

/// Test-phase warm-ups: the last `warm` states before the test segment.
EnsembleView test_warmups(const ExperimentConfig& c, const EnsembleView& data);
EnsembleView test_reference(const ExperimentConfig& c, const EnsembleView& data);

ForecastResult forecast_test(const ExperimentConfig& c, const RCNFModel& model, const EnsembleView& data,
                             NoiseMode noise = NoiseMode::kFlow);

/// Per-time metrics, bands and snapshot densities for a forecast against its reference;
/// writes <prefix>metrics.csv, <prefix>bands.json and returns the summary block as JSON text.
std::string evaluate_forecast(const ExperimentConfig& c, const EnsembleView& forecast, const EnsembleView& reference,
                              const std::string& dir, const std::string& prefix);

/// Full pipeline for one configuration. Writes every artifact into `dir` and returns the
/// summary JSON text (also written to dir/summary.json).
std::string run_experiment(const ExperimentConfig& c, const std::string& dir, const Logger& log = nullptr);

/// Number of local maxima in a smoothed histogram whose height exceeds `min_fraction` of the peak.
std::size_t count_modes(const std::vector<double>& x, std::size_t bins = 60, double min_fraction = 0.2);

}  // namespace rcnf
