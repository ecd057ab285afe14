#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rcnf/ensemble.hpp"

namespace rcnf {

enum class SystemKind { kOu, kDoubleWell, kVanDerPol, kMmo, kLinearSdde, kEnso, kLorenz };

/// How the delay history gamma on [-tau, 0] is defined.
enum class HistoryKind {
  kNone,
  kConstantInitial,  // gamma(s) = X_0
  kAffine,           // gamma(s) = slope * s + offset (componentwise)
};

struct SystemSpec {
  std::string name;
  SystemKind kind = SystemKind::kOu;
  std::size_t dim = 1;
  std::map<std::string, double> params;
  std::vector<double> diffusion;  // diagonal of g
  double delay = 0.0;
  HistoryKind history = HistoryKind::kNone;
  double history_slope = 0.0;
  double history_offset = 0.0;

  /// f(x, x_delayed) into out (all length dim). x_delayed ignored when delay == 0.
  void drift(const double* x, const double* x_delayed, double* out) const;
  double history_value(double s, const double* x0, std::size_t i) const;
  double param(const std::string& key) const;
  void validate() const;
};

/// Default parameter values for a named benchmark. Override keys are drift
/// parameters, the delay "tau0", the diffusion "g" (all components) or "g1".."g3".
SystemSpec builtin_system(const std::string& name, const std::map<std::string, double>& overrides = {});

std::vector<std::string> builtin_system_names();

struct InitialCondition {
  std::vector<double> fixed;                          // used when ranges is empty
  std::vector<std::pair<double, double>> ranges;      // per-dimension U[lo, hi]
};

struct SimConfig {
  double dt_scheme = 0.01;
  double dt_obs = 0.01;
  std::size_t n_obs = 1;
  std::size_t n_traj = 1;
  InitialCondition init;
  std::uint64_t seed = 0;

  /// Scheme steps per observation; throws if dt_obs / dt_scheme is not a positive integer.
  std::size_t stride() const;
  void validate(const SystemSpec& spec) const;
};

/// Initial condition the paper uses for each benchmark.
InitialCondition default_initial_condition(const SystemSpec& spec);

inline constexpr double kBlowUpThreshold = 1e12;

/// One Euler-Maruyama step: state + f(state, delayed) dt + g * dB, written to out.
/// Throws NumericalError if the result is non-finite or exceeds kBlowUpThreshold.
void em_step(const SystemSpec& spec, const double* state, const double* delayed, double dt,
             const double* noise_increment, double* out);

std::vector<double> em_step(const SystemSpec& spec, const std::vector<double>& state,
                            const std::optional<std::vector<double>>& delayed, double dt,
                            const std::vector<double>& noise_increment);

/// M independent Euler-Maruyama trajectories recorded every stride() scheme steps,
/// starting with the initial state at t0 = 0.
Ensemble simulate_ensemble(const SystemSpec& spec, const SimConfig& cfg);

struct MeanVar {
  double mean;
  double var;
};

MeanVar ou_closed_form(double b0, double mu0, double g, double x0, double t);

/// Exact moments of the default linear SDDE (mu0 = -1.2, tau = 1, g = 1, gamma(s) = s + 1) on [0, 2].
MeanVar linear_sdde_closed_form(double t);

}  // namespace rcnf
