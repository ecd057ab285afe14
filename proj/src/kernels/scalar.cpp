#include <cmath>

#include "internal.hpp"

namespace rcnf::kernels::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_tanh(double* state, const double* pre, double alpha, std::size_t n) {
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < n; ++i) state[i] = keep * state[i] + alpha * std::tanh(pre[i]);
}

void gram_lower(const double* f, std::size_t dim, std::size_t cols, double* g) {
  for (std::size_t i = 0; i < dim; ++i) {
    const double* fi = f + i * cols;
    for (std::size_t j = 0; j <= i; ++j) g[i * dim + j] += dot(fi, f + j * cols, cols);
  }
}

void cross(const double* y, std::size_t rows, const double* f, std::size_t dim,
           std::size_t cols, double* c) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < dim; ++k) c[r * dim + k] += dot(y + r * cols, f + k * cols, cols);
}

void squared_distances(const double* points, std::size_t n, std::size_t dim, const double* query,
                       double* out) {
  for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double* p = points + k * n;
    const double q = query[k];
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = p[j] - q;
      out[j] += diff * diff;
    }
  }
}

}  // namespace

const KernelTable kTable{&dot, &axpy, &leaky_tanh, &gram_lower, &cross, &squared_distances};

}  // namespace rcnf::kernels::scalar
