#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcnf/ensemble.hpp"

namespace rcnf {

// Distributional distances. Matrices hold one sample per row.

/// Exact 1-d W2 via quantile coupling. Unequal sizes integrate the two step quantile
/// functions over their merged breakpoints.
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);
/// Mean over dimensions of the per-dimension W2.
double wasserstein2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

constexpr std::size_t kDefaultBins = 100;
constexpr double kHistogramEps = 1e-10;

/// Histogram estimate of D_KL(a || b) on the pooled support, clipped at 0.
double kl_divergence_1d(const std::vector<double>& a, const std::vector<double>& b, std::size_t bins = kDefaultBins);
double kl_divergence(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t bins = kDefaultBins);

struct SnapshotMetric {
  std::size_t time_index = 0;
  double time = 0.0;
  double w2 = 0.0;
  double kl = 0.0;
};

/// Per-time W2 and KL between the forecast (first argument) and reference ensembles.
std::vector<SnapshotMetric> snapshot_metrics(const EnsembleView& forecast, const EnsembleView& reference,
                                             std::size_t bins = kDefaultBins);
double mean_w2(const std::vector<SnapshotMetric>& m);
double mean_kl(const std::vector<SnapshotMetric>& m);

/// Samples of the whole ensemble pooled over trajectories and times (rows are states).
Eigen::MatrixXd pooled_states(const EnsembleView& e);
/// Samples at one time index across trajectories.
Eigen::MatrixXd snapshot_states(const EnsembleView& e, std::size_t t);

struct DensityGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> centers;
  std::vector<double> density;  // integrates to 1 over [lo, hi]
};
DensityGrid density_grid(const std::vector<double>& x, std::size_t bins, double lo, double hi);

struct QuantileBands {
  std::vector<double> levels;
  // Indexed [t * dim + i]; lower/upper additionally by level.
  std::vector<double> mean, median;
  std::vector<std::vector<double>> lower, upper;
  std::size_t length = 0, dim = 0;
};
/// Median-centred central intervals per time and dimension. Needs at least 10 paths.
QuantileBands quantile_bands(const EnsembleView& e, const std::vector<double>& levels = {0.68, 0.95, 0.997});
/// Linear-interpolation sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double q);

enum class Region { kA, kB };  // A = (-inf, 0], B = (0, inf)

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n_start = 0;     // trajectories starting in the source region
  std::vector<double> times;   // relative to the first state
  std::vector<double> ratio;   // C(t) / C_source
};
/// Conditional occupation of the other region given the start region, with its least-squares
/// slope over [t_lo, t_hi]. Throws if no trajectory starts in `from`.
RateFit transition_rate(const EnsembleView& e, Region from, double t_lo = 5.0, double t_hi = 25.0);

struct LyapunovConfig {
  std::size_t min_separation = 0;  // 0: four times the ACF first zero crossing
  std::size_t horizon = 0;         // 0: L / 5
  double fit_begin = 0.0;     // fit window [fit_begin, fit_fraction] as fractions of the horizon
  double fit_fraction = 0.2;
};
struct LyapunovResult {
  double exponent = 0.0;
  std::size_t min_separation = 0;
  std::vector<double> mean_log_divergence;
};
/// Rosenstein estimator on the raw state. traj rows are states sampled at dt.
LyapunovResult max_lyapunov(const Eigen::MatrixXd& traj, double dt, LyapunovConfig cfg = {});

struct CloseReturnsMap {
  double epsilon0 = 0.0;
  std::size_t n_t = 0, n_p = 0;
  std::vector<unsigned char> black;  // [t * n_p + (p - 1)], t from 0, p from 1
  std::vector<std::size_t> histogram;  // per p
  bool at(std::size_t t, std::size_t p) const { return black[t * n_p + p - 1] != 0; }
};
CloseReturnsMap close_returns(const Eigen::MatrixXd& traj, double scale = 1e-2, std::size_t t_max = 1000,
                              std::size_t p_max = 900);

enum class CorrelationNorm {
  kStdProduct,  // Mean((X-X̄)(Y-Ȳ)) / (Std X * Std Y); lag-0 ACF is 1
  kSqrtStdProduct,  // as printed, divided by sqrt(Std X * Std Y)
};
/// out[a * d + b][p] = r^{ab}_p for p = 0..max_lag.
std::vector<std::vector<double>> acf_ccf(const Eigen::MatrixXd& traj, std::size_t max_lag,
                                         CorrelationNorm norm = CorrelationNorm::kStdProduct);
std::size_t first_zero_crossing(const std::vector<double>& acf);

// Emitters.
void write_snapshot_csv(const std::string& path, const std::vector<SnapshotMetric>& m);
void write_rate_csv(const std::string& path, const std::vector<std::pair<std::string, RateFit>>& fits);
void write_json(const std::string& path, const std::string& text);
std::string bands_json(const QuantileBands& b, double dt, double t0);
std::string density_json(const std::vector<std::pair<std::string, DensityGrid>>& grids);
std::string close_returns_json(const CloseReturnsMap& m);
std::string correlation_json(const std::vector<std::vector<double>>& r, std::size_t dim);

}  // namespace rcnf
