#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace rcnf::oracles {

// Hungarian algorithm (square cost matrix), returns the minimal total cost.
inline double assignment_cost(const std::vector<std::vector<double>>& c) {
  const std::size_t n = c.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j)
        if (!used[j]) {
          double cur = c[i0 - 1][j - 1] - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (std::size_t j = 0; j <= n; ++j)
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0;
  for (std::size_t j = 1; j <= n; ++j) total += c[p[j] - 1][j - 1];
  return total;
}

// Exact discrete OT between uniform empirical measures: replicate each point so both sides
// carry n*m unit masses, then solve the assignment problem.
inline double brute_force_w2(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> ra, rb;
  for (double x : a) ra.insert(ra.end(), b.size(), x);
  for (double y : b) rb.insert(rb.end(), a.size(), y);
  std::vector<std::vector<double>> c(ra.size(), std::vector<double>(rb.size()));
  for (std::size_t i = 0; i < ra.size(); ++i)
    for (std::size_t j = 0; j < rb.size(); ++j) c[i][j] = (ra[i] - rb[j]) * (ra[i] - rb[j]);
  return std::sqrt(assignment_cost(c) / static_cast<double>(ra.size()));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Bisection inverse of an increasing cdf on [lo, hi].
inline double invert_cdf(const std::function<double(double)>& cdf, double p, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double normal_quantile(double p) { return invert_cdf(normal_cdf, p, -40.0, 40.0); }

// Equal-weight mixture of N(-c, s^2) and N(c, s^2).
inline double symmetric_mixture_quantile(double p, double c, double s) {
  auto cdf = [&](double x) { return 0.5 * normal_cdf((x + c) / s) + 0.5 * normal_cdf((x - c) / s); };
  return invert_cdf(cdf, p, -c - 40.0 * s, c + 40.0 * s);
}

// 1-d W2 between two distributions given by quantile functions, midpoint rule on n cells.
inline double quantile_w2(const std::function<double(double)>& qa, const std::function<double(double)>& qb,
                          std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double d = qa(p) - qb(p);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace rcnf::oracles
