#include "rcnf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/kernels.hpp"
#include "rcnf/parallel.hpp"

namespace rcnf {

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

void check_pair(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ValidationError("empty sample set");
  if (a.cols() != b.cols() || a.cols() == 0) throw ValidationError("sample sets have different dimensions");
}

struct LineFit {
  double slope, intercept;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

}  // namespace

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::uint64_t n = a.size(), m = b.size();
  if (n == m) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(n));
  }
  // Breakpoints i/n and j/m on the common denominator n*m.
  const double denom = static_cast<double>(n) * static_cast<double>(m);
  std::uint64_t ia = 0, ib = 0, cur = 0;
  double s = 0.0;
  while (ia < n && ib < m) {
    const std::uint64_t na = (ia + 1) * m, nb = (ib + 1) * n, nxt = std::min(na, nb);
    const double d = a[ia] - b[ib];
    s += static_cast<double>(nxt - cur) / denom * d * d;
    cur = nxt;
    if (na == nxt) ++ia;
    if (nb == nxt) ++ib;
  }
  return std::sqrt(s);
}

double wasserstein2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_pair(a, b);
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += wasserstein2_1d(column(a, c), column(b, c));
  return s / static_cast<double>(a.cols());
}

double kl_divergence_1d(const std::vector<double>& a, const std::vector<double>& b, std::size_t bins) {
  if (a.empty() || b.empty()) throw ValidationError("empty sample set");
  if (bins == 0) throw ValidationError("bins must be positive");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  if (!(hi > lo)) return 0.0;
  const double scale = static_cast<double>(bins) / (hi - lo);
  auto hist = [&](const std::vector<double>& x) {
    std::vector<double> h(bins, 0.0);
    for (double v : x) {
      auto k = static_cast<std::size_t>((v - lo) * scale);
      h[std::min(k, bins - 1)] += 1.0;
    }
    const double total = static_cast<double>(x.size());
    const double z = 1.0 + static_cast<double>(bins) * kHistogramEps;
    for (double& v : h) v = (v / total + kHistogramEps) / z;
    return h;
  };
  const std::vector<double> p = hist(a), q = hist(b);
  double kl = 0.0;
  for (std::size_t k = 0; k < bins; ++k) kl += p[k] * std::log(p[k] / q[k]);
  return std::max(kl, 0.0);
}

double kl_divergence(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t bins) {
  check_pair(a, b);
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += kl_divergence_1d(column(a, c), column(b, c), bins);
  return s / static_cast<double>(a.cols());
}

Eigen::MatrixXd pooled_states(const EnsembleView& e) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.n_traj * e.length), static_cast<Eigen::Index>(e.dim));
  Eigen::Index r = 0;
  for (std::size_t m = 0; m < e.n_traj; ++m)
    for (std::size_t t = 0; t < e.length; ++t, ++r)
      for (std::size_t i = 0; i < e.dim; ++i) out(r, static_cast<Eigen::Index>(i)) = e(m, t, i);
  return out;
}

Eigen::MatrixXd snapshot_states(const EnsembleView& e, std::size_t t) {
  if (t >= e.length) throw ValidationError("snapshot index out of range");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.n_traj), static_cast<Eigen::Index>(e.dim));
  for (std::size_t m = 0; m < e.n_traj; ++m)
    for (std::size_t i = 0; i < e.dim; ++i) out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) = e(m, t, i);
  return out;
}

std::vector<SnapshotMetric> snapshot_metrics(const EnsembleView& forecast, const EnsembleView& reference,
                                             std::size_t bins) {
  if (forecast.length != reference.length || forecast.dim != reference.dim)
    throw ValidationError("forecast and reference ensembles have different shapes");
  if (forecast.n_traj == 0 || reference.n_traj == 0) throw ValidationError("empty ensemble");
  std::vector<SnapshotMetric> out(forecast.length);
  parallel_for(forecast.length, [&](std::size_t t) {
    const Eigen::MatrixXd f = snapshot_states(forecast, t), r = snapshot_states(reference, t);
    out[t] = {t, reference.t0 + static_cast<double>(t) * reference.dt_obs, wasserstein2(f, r), kl_divergence(f, r, bins)};
  });
  return out;
}

double mean_w2(const std::vector<SnapshotMetric>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : m) s += x.w2;
  return s / static_cast<double>(m.size());
}

double mean_kl(const std::vector<SnapshotMetric>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : m) s += x.kl;
  return s / static_cast<double>(m.size());
}

DensityGrid density_grid(const std::vector<double>& x, std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ValidationError("density grid needs bins > 0 and hi > lo");
  DensityGrid g{lo, hi, std::vector<double>(bins), std::vector<double>(bins, 0.0)};
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t k = 0; k < bins; ++k) g.centers[k] = lo + (static_cast<double>(k) + 0.5) * w;
  for (double v : x) {
    if (v < lo || v > hi) continue;
    g.density[std::min(static_cast<std::size_t>((v - lo) / w), bins - 1)] += 1.0;
  }
  const double norm = x.empty() ? 1.0 : static_cast<double>(x.size()) * w;
  for (double& d : g.density) d /= norm;
  return g;
}

double sorted_quantile(const std::vector<double>& s, double q) {
  if (s.empty()) throw ValidationError("quantile of empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(s.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= s.size()) return s.back();
  const double f = pos - static_cast<double>(k);
  return s[k] + f * (s[k + 1] - s[k]);
}

QuantileBands quantile_bands(const EnsembleView& e, const std::vector<double>& levels) {
  if (e.n_traj < 10) throw ValidationError("quantile bands need at least 10 trajectories");
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw ValidationError("band levels must lie in (0, 1)");
  QuantileBands b;
  b.levels = levels;
  b.length = e.length;
  b.dim = e.dim;
  const std::size_t cells = e.length * e.dim;
  b.mean.resize(cells);
  b.median.resize(cells);
  b.lower.assign(levels.size(), std::vector<double>(cells));
  b.upper.assign(levels.size(), std::vector<double>(cells));
  std::vector<double> v(e.n_traj);
  for (std::size_t t = 0; t < e.length; ++t)
    for (std::size_t i = 0; i < e.dim; ++i) {
      for (std::size_t m = 0; m < e.n_traj; ++m) v[m] = e(m, t, i);
      std::sort(v.begin(), v.end());
      const std::size_t c = t * e.dim + i;
      b.mean[c] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      b.median[c] = sorted_quantile(v, 0.5);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        b.lower[l][c] = sorted_quantile(v, 0.5 - levels[l] / 2.0);
        b.upper[l][c] = sorted_quantile(v, 0.5 + levels[l] / 2.0);
      }
    }
  return b;
}

RateFit transition_rate(const EnsembleView& e, Region from, double t_lo, double t_hi) {
  if (e.dim != 1) throw ValidationError("transition rates need a 1-d ensemble");
  if (!(t_hi > t_lo) || t_lo < 0.0) throw ValidationError("fit window must satisfy 0 <= t_lo < t_hi");
  const double span = static_cast<double>(e.length - 1) * e.dt_obs;
  if (t_hi > span + 1e-9 * e.dt_obs) throw ValidationError("fit window exceeds the trajectory span");
  auto in_a = [](double x) { return x <= 0.0; };
  RateFit fit;
  std::vector<std::size_t> start;
  for (std::size_t m = 0; m < e.n_traj; ++m)
    if (in_a(e(m, 0, 0)) == (from == Region::kA)) start.push_back(m);
  if (start.empty())
    throw ValidationError(std::string("no trajectory starts in region ") + (from == Region::kA ? "A" : "B"));
  fit.n_start = start.size();
  fit.times.resize(e.length);
  fit.ratio.resize(e.length);
  for (std::size_t t = 0; t < e.length; ++t) {
    std::size_t hits = 0;
    for (std::size_t m : start)
      if (in_a(e(m, t, 0)) != (from == Region::kA)) ++hits;
    fit.times[t] = static_cast<double>(t) * e.dt_obs;
    fit.ratio[t] = static_cast<double>(hits) / static_cast<double>(start.size());
  }
  std::vector<double> x, y;
  const double tol = 1e-9 * e.dt_obs;
  for (std::size_t t = 0; t < e.length; ++t)
    if (fit.times[t] >= t_lo - tol && fit.times[t] <= t_hi + tol) {
      x.push_back(fit.times[t]);
      y.push_back(fit.ratio[t]);
    }
  if (x.size() < 2) throw ValidationError("fit window contains fewer than two samples");
  const LineFit lf = least_squares(x, y);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  return fit;
}

std::vector<std::vector<double>> acf_ccf(const Eigen::MatrixXd& traj, std::size_t max_lag, CorrelationNorm norm) {
  const std::size_t len = static_cast<std::size_t>(traj.rows()), d = static_cast<std::size_t>(traj.cols());
  if (d == 0 || len <= max_lag) throw ValidationError("correlation needs L > max_lag");
  std::vector<std::vector<double>> centred(d, std::vector<double>(len));
  std::vector<double> sd(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mu = traj.col(static_cast<Eigen::Index>(i)).mean();
    double ss = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      centred[i][t] = traj(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) - mu;
      ss += centred[i][t] * centred[i][t];
    }
    sd[i] = std::sqrt(ss / static_cast<double>(len));
    if (!(sd[i] > 0.0)) throw ValidationError("zero-variance component " + std::to_string(i));
  }
  const auto& k = kernels::active();
  std::vector<std::vector<double>> out(d * d, std::vector<double>(max_lag + 1));
  parallel_for(d * d, [&](std::size_t ab) {
    const std::size_t a = ab / d, b = ab % d;
    const double denom = norm == CorrelationNorm::kStdProduct ? sd[a] * sd[b] : std::sqrt(sd[a] * sd[b]);
    for (std::size_t p = 0; p <= max_lag; ++p) {
      const std::size_t n = len - p;
      out[ab][p] = k.dot(centred[a].data(), centred[b].data() + p, n) / static_cast<double>(n) / denom;
    }
  });
  return out;
}

std::size_t first_zero_crossing(const std::vector<double>& acf) {
  for (std::size_t p = 1; p < acf.size(); ++p)
    if (acf[p] <= 0.0) return p;
  return acf.size();
}

LyapunovResult max_lyapunov(const Eigen::MatrixXd& traj, double dt, LyapunovConfig cfg) {
  const std::size_t len = static_cast<std::size_t>(traj.rows()), d = static_cast<std::size_t>(traj.cols());
  if (len < 500) throw ValidationError("MLE needs a trajectory of at least 500 states");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (cfg.horizon == 0) cfg.horizon = len / 5;
  if (cfg.min_separation == 0) {
    const std::size_t cap = len / 10;
    std::size_t sum = 0;
    const auto r = acf_ccf(traj, cap);
    for (std::size_t i = 0; i < d; ++i) sum += std::min(first_zero_crossing(r[i * d + i]), cap);
    cfg.min_separation = std::max<std::size_t>(1, std::min(cap, 4 * sum / d));
  }
  const std::size_t horizon = cfg.horizon;
  if (horizon < 2 || horizon >= len) throw ValidationError("MLE horizon out of range");
  const std::size_t n_ref = len - horizon;
  if (n_ref <= 2 * cfg.min_separation + 1) throw ValidationError("insufficient neighbours for the MLE");

  std::vector<double> pts(d * n_ref);  // dimension-major
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t j = 0; j < n_ref; ++j) pts[k * n_ref + j] = traj(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));

  constexpr std::size_t kChunks = 64;
  std::vector<std::vector<double>> sums(kChunks, std::vector<double>(horizon, 0.0));
  std::vector<std::vector<std::size_t>> counts(kChunks, std::vector<std::size_t>(horizon, 0));
  const auto& kt = kernels::active();
  parallel_for(kChunks, [&](std::size_t c) {
    std::vector<double> dist(n_ref), q(d);
    const std::size_t lo = c * n_ref / kChunks, hi = (c + 1) * n_ref / kChunks;
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t k = 0; k < d; ++k) q[k] = pts[k * n_ref + i];
      kt.squared_distances(pts.data(), n_ref, d, q.data(), dist.data());
      std::size_t best = n_ref;
      double bd = 0.0;
      for (std::size_t j = 0; j < n_ref; ++j) {
        const std::size_t sep = i > j ? i - j : j - i;
        if (sep <= cfg.min_separation || !(dist[j] > 0.0)) continue;
        if (best == n_ref || dist[j] < bd) {
          best = j;
          bd = dist[j];
        }
      }
      if (best == n_ref) continue;
      for (std::size_t s = 0; s < horizon; ++s) {
        const auto diff = traj.row(static_cast<Eigen::Index>(i + s)) - traj.row(static_cast<Eigen::Index>(best + s));
        const double dd = diff.norm();
        if (dd > 0.0) {
          sums[c][s] += std::log(dd);
          ++counts[c][s];
        }
      }
    }
  });
  LyapunovResult res;
  res.min_separation = cfg.min_separation;
  res.mean_log_divergence.assign(horizon, 0.0);
  for (std::size_t s = 0; s < horizon; ++s) {
    double tot = 0.0;
    std::size_t cnt = 0;
    for (std::size_t c = 0; c < kChunks; ++c) {
      tot += sums[c][s];
      cnt += counts[c][s];
    }
    if (cnt == 0) throw NumericalError("no neighbour pairs for the MLE");
    res.mean_log_divergence[s] = tot / static_cast<double>(cnt);
  }
  const auto frac = [&](double f) { return static_cast<std::size_t>(f * static_cast<double>(horizon)); };
  const std::size_t first = std::min(frac(cfg.fit_begin), horizon - 2);
  const std::size_t last = std::min(horizon, std::max(first + 2, frac(cfg.fit_fraction)));
  std::vector<double> x, y;
  for (std::size_t s = first; s < last; ++s) {
    x.push_back(static_cast<double>(s) * dt);
    y.push_back(res.mean_log_divergence[s]);
  }
  res.exponent = least_squares(x, y).slope;
  return res;
}

CloseReturnsMap close_returns(const Eigen::MatrixXd& traj, double scale, std::size_t t_max, std::size_t p_max) {
  const std::size_t len = static_cast<std::size_t>(traj.rows());
  if (p_max == 0 || t_max == 0 || len <= p_max) throw ValidationError("close returns need L > max lag");
  if (!(scale > 0.0)) throw ValidationError("close-returns scale must be positive");
  const Eigen::RowVectorXd range = traj.colwise().maxCoeff() - traj.colwise().minCoeff();
  const double rn = range.norm();
  if (!(rn > 0.0)) throw ValidationError("degenerate range: constant trajectory");
  CloseReturnsMap m;
  m.epsilon0 = scale * rn;
  m.n_t = std::min(t_max, len - p_max);
  m.n_p = p_max;
  m.black.assign(m.n_t * m.n_p, 0);
  m.histogram.assign(m.n_p, 0);
  const double e2 = m.epsilon0 * m.epsilon0;
  for (std::size_t t = 0; t < m.n_t; ++t)
    for (std::size_t p = 1; p <= m.n_p; ++p) {
      const double dd = (traj.row(static_cast<Eigen::Index>(t)) - traj.row(static_cast<Eigen::Index>(t + p))).squaredNorm();
      if (dd < e2) {
        m.black[t * m.n_p + p - 1] = 1;
        ++m.histogram[p - 1];
      }
    }
  return m;
}

void write_snapshot_csv(const std::string& path, const std::vector<SnapshotMetric>& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.precision(10);
  os << "time_index,time,w2,kl\n";
  for (const auto& x : m) os << x.time_index << ',' << x.time << ',' << x.w2 << ',' << x.kl << '\n';
  if (!os) throw IoError("write failed: " + path);
}

void write_rate_csv(const std::string& path, const std::vector<std::pair<std::string, RateFit>>& fits) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.precision(10);
  os << "label,slope,intercept,n_start\n";
  for (const auto& [label, f] : fits) os << label << ',' << f.slope << ',' << f.intercept << ',' << f.n_start << '\n';
  if (!os) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << text << '\n';
  if (!os) throw IoError("write failed: " + path);
}

std::string bands_json(const QuantileBands& b, double dt, double t0) {
  nlohmann::json j;
  j["levels"] = b.levels;
  j["dim"] = b.dim;
  std::vector<double> times(b.length);
  for (std::size_t t = 0; t < b.length; ++t) times[t] = t0 + static_cast<double>(t) * dt;
  j["time"] = times;
  j["mean"] = b.mean;
  j["median"] = b.median;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  return j.dump();
}

std::string density_json(const std::vector<std::pair<std::string, DensityGrid>>& grids) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, g] : grids) j[name] = {{"lo", g.lo}, {"hi", g.hi}, {"centers", g.centers}, {"density", g.density}};
  return j.dump();
}

std::string close_returns_json(const CloseReturnsMap& m) {
  nlohmann::json j = {{"epsilon0", m.epsilon0}, {"n_t", m.n_t}, {"n_p", m.n_p}, {"histogram", m.histogram}};
  return j.dump();
}

std::string correlation_json(const std::vector<std::vector<double>>& r, std::size_t dim) {
  nlohmann::json j;
  j["dim"] = dim;
  j["r"] = r;  // r[a * dim + b][p]
  return j.dump();
}

}  // namespace rcnf
