#include <atomic>
#include <cstdlib>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {
namespace {

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(7, "flow"), derive_seed(7, "flow"));
  std::set<std::uint64_t> seen;
  for (const char* name : {"simulate", "reservoir", "bo", "flow", "forecast"}) seen.insert(derive_seed(7, name));
  for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 105u);
  EXPECT_NE(derive_seed(7, "flow"), derive_seed(8, "flow"));
}

TEST(Rng, StandardNormalMoments) {
  Engine eng = make_engine(42);
  std::vector<double> x(200000);
  fill_standard_normal(eng, x);
  double m = 0, v = 0;
  for (double s : x) m += s;
  m /= x.size();
  for (double s : x) v += (s - m) * (s - m);
  v /= x.size() - 1;
  EXPECT_NEAR(m, 0.0, 5.0 / std::sqrt(200000.0));
  EXPECT_NEAR(v, 1.0, 0.02);
}

TEST(Parallel, EveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  parallel_for(0, [&](std::size_t) { FAIL(); });
}

TEST(Parallel, ThreadCountFromEnvironment) {
  setenv("RCNF_THREADS", "3", 1);
  EXPECT_EQ(thread_count(), 3u);
  unsetenv("RCNF_THREADS");
  EXPECT_GE(thread_count(), 1u);
}

TEST(Parallel, ExceptionPropagates) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 5) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

}  // namespace
}  // namespace rcnf
