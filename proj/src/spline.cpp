#include "rcnf/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "rcnf/errors.hpp"

namespace rcnf {
namespace {

double softplus(double r) { return r > 30 ? r : std::log1p(std::exp(r)); }
double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

void softmax(const double* logits, int k, double* p) {
  double mx = logits[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (int i = 0; i < k; ++i) p[i] /= s;
}

int find_bin(const double* edges, int k, double v) {
  int b = static_cast<int>(std::upper_bound(edges + 1, edges + k, v) - (edges + 1));
  return std::clamp(b, 0, k - 1);
}

}  // namespace

SplineKnots rqs_knots(const double* raw, const SplineConfig& c) {
  const int k = c.bins;
  if (k < 2 || k > kMaxSplineBins) throw ValidationError("spline bin count must be in [2, 32]");
  SplineKnots kn;
  kn.k = k;
  softmax(raw, k, kn.pw.data());
  softmax(raw + k, k, kn.ph.data());
  const double span = 2.0 * c.bound;
  const double fw = 1.0 - c.min_bin_width * k, fh = 1.0 - c.min_bin_height * k;
  kn.xs[0] = kn.ys[0] = -c.bound;
  for (int i = 0; i < k; ++i) {
    kn.xs[i + 1] = kn.xs[i] + span * (c.min_bin_width + fw * kn.pw[i]);
    kn.ys[i + 1] = kn.ys[i] + span * (c.min_bin_height + fh * kn.ph[i]);
  }
  kn.xs[k] = kn.ys[k] = c.bound;
  kn.ds[0] = kn.ds[k] = 1.0;
  for (int i = 1; i < k; ++i) kn.ds[i] = c.min_derivative + softplus(raw[2 * k + i - 1]);
  return kn;
}

double SplineConfig::identity_derivative_raw() const {
  const double target = 1.0 - min_derivative;  // softplus(r) = target
  return std::log(std::expm1(target));
}

void rqs_identity(double* raw, const SplineConfig& cfg) {
  for (int i = 0; i < 2 * cfg.bins; ++i) raw[i] = 0.0;
  for (int i = 0; i < cfg.bins - 1; ++i) raw[2 * cfg.bins + i] = cfg.identity_derivative_raw();
}

SplineEval rqs_forward(double x, const double* raw, const SplineConfig& cfg) {
  if (!(x >= -cfg.bound && x <= cfg.bound)) return {x, 0.0};
  return rqs_forward(x, rqs_knots(raw, cfg), cfg);
}

SplineEval rqs_forward(double x, const SplineKnots& kn, const SplineConfig& cfg) {
  if (!(x >= -cfg.bound && x <= cfg.bound)) return {x, 0.0};
  const int b = find_bin(kn.xs.data(), kn.k, x);
  const double w = kn.xs[b + 1] - kn.xs[b], h = kn.ys[b + 1] - kn.ys[b];
  const double s = h / w, d0 = kn.ds[b], d1 = kn.ds[b + 1];
  const double xi = std::clamp((x - kn.xs[b]) / w, 0.0, 1.0);
  const double a = xi * (1.0 - xi);
  const double den = s + (d1 + d0 - 2.0 * s) * a;
  const double num = s * xi * xi + d0 * a;
  const double m = d1 * xi * xi + 2.0 * s * a + d0 * (1.0 - xi) * (1.0 - xi);
  return {kn.ys[b] + h * num / den, 2.0 * std::log(s) + std::log(m) - 2.0 * std::log(den)};
}

SplineEval rqs_inverse(double y, const double* raw, const SplineConfig& cfg) {
  if (!(y >= -cfg.bound && y <= cfg.bound)) return {y, 0.0};
  return rqs_inverse(y, rqs_knots(raw, cfg), cfg);
}

SplineEval rqs_inverse(double y, const SplineKnots& kn, const SplineConfig& cfg) {
  if (!(y >= -cfg.bound && y <= cfg.bound)) return {y, 0.0};
  const int b = find_bin(kn.ys.data(), kn.k, y);
  const double w = kn.xs[b + 1] - kn.xs[b], h = kn.ys[b + 1] - kn.ys[b];
  const double s = h / w, d0 = kn.ds[b], d1 = kn.ds[b + 1];
  const double dy = y - kn.ys[b];
  const double q = d1 + d0 - 2.0 * s;
  const double qa = h * (s - d0) + dy * q;
  const double qb = h * d0 - dy * q;
  const double qc = -s * dy;
  const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
  // Numerically stable root that lies in [0, 1].
  double xi = (2.0 * qc) / (-qb - std::sqrt(disc));
  if (!std::isfinite(xi)) xi = 0.0;
  xi = std::clamp(xi, 0.0, 1.0);
  // One Newton polish on the forward map recovers the digits lost in the root formula.
  {
    const double a0 = xi * (1.0 - xi);
    const double den0 = s + q * a0;
    const double f = h * (s * xi * xi + d0 * a0) / den0 - dy;
    const double m0 = d1 * xi * xi + 2.0 * s * a0 + d0 * (1.0 - xi) * (1.0 - xi);
    const double dfdxi = h * s * m0 / (den0 * den0);
    if (dfdxi > 0.0 && std::isfinite(f)) xi = std::clamp(xi - f / dfdxi, 0.0, 1.0);
  }
  const double a = xi * (1.0 - xi);
  const double den = s + q * a;
  const double m = d1 * xi * xi + 2.0 * s * a + d0 * (1.0 - xi) * (1.0 - xi);
  return {kn.xs[b] + xi * w, -(2.0 * std::log(s) + std::log(m) - 2.0 * std::log(den))};
}

double rqs_backward(double x, const double* raw, const SplineConfig& cfg, double g_y, double g_logdet,
                    double* g_raw) {
  if (!(x >= -cfg.bound && x <= cfg.bound)) return g_y;
  return rqs_backward(x, raw, rqs_knots(raw, cfg), cfg, g_y, g_logdet, g_raw);
}

double rqs_backward(double x, const double* raw, const SplineKnots& kn, const SplineConfig& cfg, double g_y,
                    double g_logdet, double* g_raw) {
  if (!(x >= -cfg.bound && x <= cfg.bound)) return g_y;
  const int k = kn.k;
  const int b = find_bin(kn.xs.data(), k, x);
  const double w = kn.xs[b + 1] - kn.xs[b], h = kn.ys[b + 1] - kn.ys[b];
  const double s = h / w, d0 = kn.ds[b], d1 = kn.ds[b + 1];
  const double xi = (x - kn.xs[b]) / w;
  const double a = xi * (1.0 - xi), da = 1.0 - 2.0 * xi;
  const double q = d1 + d0 - 2.0 * s;
  const double den = s + q * a;
  const double num = s * xi * xi + d0 * a;
  const double m = d1 * xi * xi + 2.0 * s * a + d0 * (1.0 - xi) * (1.0 - xi);
  const double r = num / den;
  const double den2 = den * den;

  // y = y_b + h * r(xi, s, d0, d1);  L = 2 log s + log m - 2 log den.
  const double r_xi = ((2.0 * s * xi + d0 * da) * den - num * q * da) / den2;
  const double r_s = (xi * xi * den - num * (1.0 - 2.0 * a)) / den2;
  const double r_d0 = a * (den - num) / den2;
  const double r_d1 = -num * a / den2;
  const double m_xi = 2.0 * d1 * xi + 2.0 * s * da - 2.0 * d0 * (1.0 - xi);
  const double l_xi = m_xi / m - 2.0 * q * da / den;
  const double l_s = 2.0 / s + 2.0 * a / m - 2.0 * (1.0 - 2.0 * a) / den;
  const double l_d0 = (1.0 - xi) * (1.0 - xi) / m - 2.0 * a / den;
  const double l_d1 = xi * xi / m - 2.0 * a / den;

  const double g_xi = g_y * h * r_xi + g_logdet * l_xi;
  const double g_s = g_y * h * r_s + g_logdet * l_s;
  double g_h = g_y * r + g_s / w;
  const double g_yb = g_y;
  const double g_d0 = g_y * h * r_d0 + g_logdet * l_d0;
  const double g_d1 = g_y * h * r_d1 + g_logdet * l_d1;
  // xi = (x - x_b) / w, s = h / w
  const double g_x = g_xi / w;
  const double g_xb = -g_xi / w;
  const double g_w = -g_xi * xi / w - g_s * s / w;

  // x_b = -B + sum_{j<b} width_j, w = width_b; likewise for heights.
  std::array<double, kMaxSplineBins> g_width{}, g_height{};
  for (int j = 0; j < b; ++j) {
    g_width[j] = g_xb;
    g_height[j] = g_yb;
  }
  g_width[b] = g_w;
  g_height[b] = g_h;

  const double span = 2.0 * cfg.bound;
  const double fw = span * (1.0 - cfg.min_bin_width * k), fh = span * (1.0 - cfg.min_bin_height * k);
  double dot_w = 0.0, dot_h = 0.0;
  for (int j = 0; j < k; ++j) {
    dot_w += kn.pw[j] * g_width[j];
    dot_h += kn.ph[j] * g_height[j];
  }
  for (int j = 0; j < k; ++j) {
    g_raw[j] += fw * kn.pw[j] * (g_width[j] - dot_w);
    g_raw[k + j] += fh * kn.ph[j] * (g_height[j] - dot_h);
  }
  // Interior derivatives d_i = min + softplus(raw[2k + i - 1]); d_0 = d_K = 1 are constants.
  if (b >= 1) g_raw[2 * k + b - 1] += g_d0 * sigmoid(raw[2 * k + b - 1]);
  if (b + 1 <= k - 1) g_raw[2 * k + b] += g_d1 * sigmoid(raw[2 * k + b]);
  return g_x;
}

}  // namespace rcnf
