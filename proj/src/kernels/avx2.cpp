// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "internal.hpp"

namespace rcnf::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(y) for y in [-40, 0]. Cody-Waite reduction, degree-12 Taylor core.
inline __m256d exp_nonpositive(__m256d y) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(y, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, y);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double kCoef[] = {
      1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,     1.0 / 6.0,
      0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(kCoef[0]);
  for (int k = 1; k < 13; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoef[k]));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_cvtepi32_epi64(ni);
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d tanh4(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d sign = _mm256_and_pd(x, sign_mask);
  __m256d ax = _mm256_andnot_pd(sign_mask, x);
  ax = _mm256_min_pd(ax, _mm256_set1_pd(20.0));
  const __m256d e = exp_nonpositive(_mm256_mul_pd(ax, _mm256_set1_pd(-2.0)));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d t = _mm256_div_pd(_mm256_sub_pd(one, e), _mm256_add_pd(one, e));
  return _mm256_or_pd(t, sign);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_tanh(double* state, const double* pre, double alpha, std::size_t n) {
  const double keep = 1.0 - alpha;
  const __m256d vk = _mm256_set1_pd(keep);
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = tanh4(_mm256_loadu_pd(pre + i));
    const __m256d s = _mm256_loadu_pd(state + i);
    _mm256_storeu_pd(state + i, _mm256_add_pd(_mm256_mul_pd(vk, s), _mm256_mul_pd(va, t)));
  }
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = pre[k];
    alignas(32) double t[4];
    _mm256_store_pd(t, tanh4(_mm256_load_pd(buf)));
    for (std::size_t k = i; k < n; ++k) state[k] = keep * state[k] + alpha * t[k - i];
  }
}

// 3 x 4 register tile of F F^T over the vectorizable part of the columns.
inline void tile_3x4(const double* f, std::size_t cols, std::size_t i0, std::size_t j0,
                     std::size_t vec_cols, double out[3][4]) {
  __m256d acc[3][4];
  for (auto& row : acc)
    for (auto& a : row) a = _mm256_setzero_pd();
  const double* fi0 = f + i0 * cols;
  const double* fi1 = fi0 + cols;
  const double* fi2 = fi1 + cols;
  const double* fj0 = f + j0 * cols;
  const double* fj1 = fj0 + cols;
  const double* fj2 = fj1 + cols;
  const double* fj3 = fj2 + cols;
  for (std::size_t c = 0; c < vec_cols; c += 4) {
    const __m256d a0 = _mm256_loadu_pd(fi0 + c);
    const __m256d a1 = _mm256_loadu_pd(fi1 + c);
    const __m256d a2 = _mm256_loadu_pd(fi2 + c);
    __m256d b = _mm256_loadu_pd(fj0 + c);
    acc[0][0] = _mm256_fmadd_pd(a0, b, acc[0][0]);
    acc[1][0] = _mm256_fmadd_pd(a1, b, acc[1][0]);
    acc[2][0] = _mm256_fmadd_pd(a2, b, acc[2][0]);
    b = _mm256_loadu_pd(fj1 + c);
    acc[0][1] = _mm256_fmadd_pd(a0, b, acc[0][1]);
    acc[1][1] = _mm256_fmadd_pd(a1, b, acc[1][1]);
    acc[2][1] = _mm256_fmadd_pd(a2, b, acc[2][1]);
    b = _mm256_loadu_pd(fj2 + c);
    acc[0][2] = _mm256_fmadd_pd(a0, b, acc[0][2]);
    acc[1][2] = _mm256_fmadd_pd(a1, b, acc[1][2]);
    acc[2][2] = _mm256_fmadd_pd(a2, b, acc[2][2]);
    b = _mm256_loadu_pd(fj3 + c);
    acc[0][3] = _mm256_fmadd_pd(a0, b, acc[0][3]);
    acc[1][3] = _mm256_fmadd_pd(a1, b, acc[1][3]);
    acc[2][3] = _mm256_fmadd_pd(a2, b, acc[2][3]);
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b) {
      double s = hsum(acc[a][b]);
      const double* fi = f + (i0 + a) * cols;
      const double* fj = f + (j0 + b) * cols;
      for (std::size_t c = vec_cols; c < cols; ++c) s += fi[c] * fj[c];
      out[a][b] = s;
    }
}

void gram_lower(const double* f, std::size_t dim, std::size_t cols, double* g) {
  const std::size_t vec_cols = cols & ~std::size_t{3};
  std::size_t i0 = 0;
  for (; i0 + 3 <= dim; i0 += 3) {
    std::size_t j0 = 0;
    for (; j0 + 4 <= i0 + 3; j0 += 4) {
      double out[3][4];
      tile_3x4(f, cols, i0, j0, vec_cols, out);
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 4; ++b)
          if (j0 + b <= i0 + a) g[(i0 + a) * dim + j0 + b] += out[a][b];
    }
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t j = j0; j <= i0 + a; ++j)
        g[(i0 + a) * dim + j] += dot(f + (i0 + a) * cols, f + j * cols, cols);
  }
  for (; i0 < dim; ++i0)
    for (std::size_t j = 0; j <= i0; ++j) g[i0 * dim + j] += dot(f + i0 * cols, f + j * cols, cols);
}

void cross(const double* y, std::size_t rows, const double* f, std::size_t dim, std::size_t cols,
           double* c) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < dim; ++k) c[r * dim + k] += dot(y + r * cols, f + k * cols, cols);
}

void squared_distances(const double* points, std::size_t n, std::size_t dim, const double* query,
                       double* out) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < dim; ++k) {
      const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(points + k * n + j), _mm256_set1_pd(query[k]));
      acc = _mm256_fmadd_pd(diff, diff, acc);
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = points[k * n + j] - query[k];
      s += diff * diff;
    }
    out[j] = s;
  }
}

}  // namespace

const KernelTable kTable{&dot, &axpy, &leaky_tanh, &gram_lower, &cross, &squared_distances};

}  // namespace rcnf::kernels::avx2
