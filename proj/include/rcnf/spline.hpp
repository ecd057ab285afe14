#pragma once

#include <array>
#include <cstddef>

namespace rcnf {

/// Monotone rational-quadratic spline on [-bound, bound], identity outside. The
/// 3K - 1 unconstrained parameters are K width logits, K height logits and K - 1
/// interior-knot derivative pre-activations (softplus); boundary derivatives are 1.
struct SplineConfig {
  int bins = 8;
  double bound = 5.0;
  double min_bin_width = 1e-3;
  double min_bin_height = 1e-3;
  double min_derivative = 1e-3;

  int n_params() const { return 3 * bins - 1; }
  /// Raw derivative value that yields a unit knot derivative.
  double identity_derivative_raw() const;
};

struct SplineEval {
  double y;
  double logdet;  // log dy/dx
};

inline constexpr int kMaxSplineBins = 32;

/// Knot positions and derivatives derived from the raw parameters. Evaluations that share
/// parameters can build this once.
struct SplineKnots {
  int k;
  std::array<double, kMaxSplineBins> pw, ph;  // width and height softmax probabilities
  std::array<double, kMaxSplineBins + 1> xs, ys, ds;
};

SplineKnots rqs_knots(const double* raw, const SplineConfig& cfg);

SplineEval rqs_forward(double x, const double* raw, const SplineConfig& cfg);
SplineEval rqs_forward(double x, const SplineKnots& kn, const SplineConfig& cfg);
/// Inverse map; logdet is log dx/dy (the negation of the forward logdet at x).
SplineEval rqs_inverse(double y, const double* raw, const SplineConfig& cfg);
SplineEval rqs_inverse(double y, const SplineKnots& kn, const SplineConfig& cfg);

/// Reverse-mode step for rqs_forward: given dL/dy and dL/dlogdet, accumulates
/// dL/draw into g_raw (length n_params) and returns dL/dx.
double rqs_backward(double x, const double* raw, const SplineConfig& cfg, double g_y, double g_logdet,
                    double* g_raw);
/// Same, with the knots of `raw` already built.
double rqs_backward(double x, const double* raw, const SplineKnots& kn, const SplineConfig& cfg, double g_y,
                    double g_logdet, double* g_raw);

/// Fills raw with the identity-spline parameters.
void rqs_identity(double* raw, const SplineConfig& cfg);

}  // namespace rcnf
