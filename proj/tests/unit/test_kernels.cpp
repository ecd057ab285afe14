#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rcnf/kernels.hpp"

namespace rcnf::kernels {
namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(eng);
  return v;
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!isa_supported(Isa::kAvx2)) GTEST_SKIP() << "AVX2 not available";
  }
  const KernelTable& ref = table(Isa::kScalar);
  const KernelTable& vec = table(Isa::kAvx2);
};

TEST_P(KernelEquivalence, Dot) {
  std::size_t n = GetParam();
  auto a = random_vec(n, 1), b = random_vec(n, 2);
  double r = ref.dot(a.data(), b.data(), n);
  double v = vec.dot(a.data(), b.data(), n);
  EXPECT_NEAR(r, v, 1e-12 * (1.0 + std::abs(r)) * std::sqrt(double(n) + 1));
}

TEST_P(KernelEquivalence, Axpy) {
  std::size_t n = GetParam();
  auto x = random_vec(n, 3), y1 = random_vec(n, 4);
  auto y2 = y1;
  ref.axpy(0.37, x.data(), y1.data(), n);
  vec.axpy(0.37, x.data(), y2.data(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-15);
}

TEST_P(KernelEquivalence, LeakyTanh) {
  std::size_t n = GetParam();
  auto pre = random_vec(n, 5);
  for (auto& p : pre) p *= 6.0;
  auto s1 = random_vec(n, 6);
  auto s2 = s1;
  ref.leaky_tanh(s1.data(), pre.data(), 0.3, n);
  vec.leaky_tanh(s2.data(), pre.data(), 0.3, n);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(s1[i], s2[i], 1e-14);
    EXPECT_NEAR(s1[i], 0.7 * random_vec(n, 6)[i] + 0.3 * std::tanh(pre[i]), 1e-14);
  }
}

TEST_P(KernelEquivalence, GramAndCross) {
  std::size_t cols = GetParam() + 1;
  std::size_t dim = 13, rows = 3;
  auto f = random_vec(dim * cols, 7), y = random_vec(rows * cols, 8);
  std::vector<double> g1(dim * dim, 0.0), g2(dim * dim, 0.0);
  ref.gram_lower(f.data(), dim, cols, g1.data());
  vec.gram_lower(f.data(), dim, cols, g2.data());
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double oracle = 0.0;
      for (std::size_t c = 0; c < cols; ++c) oracle += f[i * cols + c] * f[j * cols + c];
      EXPECT_NEAR(g1[i * dim + j], oracle, 1e-11);
      EXPECT_NEAR(g2[i * dim + j], oracle, 1e-11);
    }
  std::vector<double> c1(rows * dim, 0.0), c2(rows * dim, 0.0);
  ref.cross(y.data(), rows, f.data(), dim, cols, c1.data());
  vec.cross(y.data(), rows, f.data(), dim, cols, c2.data());
  for (std::size_t i = 0; i < rows * dim; ++i) EXPECT_NEAR(c1[i], c2[i], 1e-11);
}

TEST_P(KernelEquivalence, SquaredDistances) {
  std::size_t n = GetParam();
  std::size_t dim = 3;
  auto pts = random_vec(n * dim, 9), q = random_vec(dim, 10);
  std::vector<double> o1(n), o2(n);
  ref.squared_distances(pts.data(), n, dim, q.data(), o1.data());
  vec.squared_distances(pts.data(), n, dim, q.data(), o2.data());
  for (std::size_t j = 0; j < n; ++j) {
    double oracle = 0.0;
    for (std::size_t k = 0; k < dim; ++k) oracle += std::pow(pts[k * n + j] - q[k], 2);
    EXPECT_NEAR(o1[j], oracle, 1e-12);
    EXPECT_NEAR(o2[j], oracle, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Lengths, KernelEquivalence, ::testing::Values(0, 1, 3, 4, 7, 8, 17, 64, 501));

TEST(Dispatch, ScalarAlwaysSupported) {
  EXPECT_TRUE(isa_supported(Isa::kScalar));
  Isa before = active_isa();
  set_active_isa(Isa::kScalar);
  EXPECT_EQ(active_isa(), Isa::kScalar);
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  EXPECT_DOUBLE_EQ(dot(a, b), 32.0);
  set_active_isa(before);
}

}  // namespace
}  // namespace rcnf::kernels
