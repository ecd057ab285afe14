#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rcnf {

struct EnsembleMeta {
  std::string system;
  std::uint64_t seed = 0;
  std::string config_hash;
};

class Ensemble;

/// Read-only window onto an ensemble: a contiguous range of trajectories and times.
struct EnsembleView {
  const double* base = nullptr;
  std::size_t n_traj = 0;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::size_t traj_stride = 0;  // doubles between consecutive trajectories
  double dt_obs = 0.0;
  double t0 = 0.0;

  const double* state(std::size_t m, std::size_t t) const { return base + m * traj_stride + t * dim; }
  double operator()(std::size_t m, std::size_t t, std::size_t i) const { return state(m, t)[i]; }

  EnsembleView time_slice(std::size_t begin, std::size_t len) const;
  EnsembleView traj_slice(std::size_t begin, std::size_t count) const;
  Ensemble materialize() const;
  /// All samples of dimension i at time t (one per trajectory).
  std::vector<double> snapshot(std::size_t t, std::size_t i) const;
  /// All states of dimension i pooled over trajectories and times.
  std::vector<double> pooled(std::size_t i) const;
};

class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(std::size_t n_traj, std::size_t length, std::size_t dim, double dt_obs, double t0 = 0.0);
  Ensemble(std::size_t n_traj, std::size_t length, std::size_t dim, double dt_obs, double t0,
           std::vector<double> data);

  std::size_t n_traj() const { return n_traj_; }
  std::size_t length() const { return length_; }
  std::size_t dim() const { return dim_; }
  double dt_obs() const { return dt_obs_; }
  double t0() const { return t0_; }

  double* state(std::size_t m, std::size_t t) { return data_.data() + (m * length_ + t) * dim_; }
  const double* state(std::size_t m, std::size_t t) const { return data_.data() + (m * length_ + t) * dim_; }
  double& operator()(std::size_t m, std::size_t t, std::size_t i) { return state(m, t)[i]; }
  double operator()(std::size_t m, std::size_t t, std::size_t i) const { return state(m, t)[i]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  EnsembleView view() const;
  operator EnsembleView() const { return view(); }  // NOLINT

  /// Throws ValidationError on empty shape or non-finite entries.
  void check_finite() const;

  EnsembleMeta meta;

 private:
  std::size_t n_traj_ = 0;
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  double dt_obs_ = 0.0;
  double t0_ = 0.0;
  std::vector<double> data_;
};

struct SplitSpec {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  std::size_t warm = 0;

  void validate(std::size_t length) const;
};

struct SplitViews {
  EnsembleView train;
  EnsembleView valid;
  EnsembleView test;
};

SplitViews split(const EnsembleView& e, const SplitSpec& s);

struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }
  void apply_inplace(double* x) const;
  void invert_inplace(double* x) const;
};

/// Per-dimension mean/std pooled over all trajectories and times.
Scaler fit_scaler(const EnsembleView& e);
Ensemble apply_scaler(const EnsembleView& e, const Scaler& s);
Ensemble invert_scaler(const EnsembleView& e, const Scaler& s);

inline constexpr std::uint32_t kTrajectoryFormatVersion = 1;

/// TRJ1 binary file plus a JSON sidecar at path + ".json".
void save_ensemble(const Ensemble& e, const std::string& path);
Ensemble load_ensemble(const std::string& path);

}  // namespace rcnf
