#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "pdmp/parallel.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/stats.hpp"

using namespace pdmp;

TEST(Rng, SameSeedSameStream) {
  Rng a(42);
  Rng b(42);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a(), b());
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t id = 0; id < 1000; ++id) seen.insert(derive_seed(7, id));
  EXPECT_EQ(seen.size(), 1000U);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
  EXPECT_EQ(replica_seed(9, 2, 5), derive_seed(9, 7));
}

TEST(Rng, UniformAndExponentialRanges) {
  Rng rng(1);
  const int n = 200000;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double e = rng.exponential();
    ASSERT_GT(e, 0.0);
    sum += e;
  }
  EXPECT_NEAR(sum / n, 1.0, 4.0 / std::sqrt(n));
}

TEST(Stats, IidEstimate) {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  const auto e = iid_estimate(xs);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(e.n, 4U);
  EXPECT_NEAR(e.z_score(), 2.5 / e.std_error, 1e-12);
}

TEST(Stats, BatchMeansRecordsBatches) {
  std::vector<double> means(20, 1.0);
  const auto e = batch_means_estimate(means, 500);
  EXPECT_EQ(e.method, EstimateWithError::Method::BatchMeans);
  EXPECT_EQ(e.n_batches, 20U);
  EXPECT_EQ(e.n, 500U);
  EXPECT_DOUBLE_EQ(e.mean, 1.0);
  EXPECT_DOUBLE_EQ(e.std_error, 0.0);
}

TEST(Stats, KolmogorovSurvivalReferenceValues) {
  EXPECT_NEAR(kolmogorov_survival(1.0), 0.26999967167735456, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(1.36), 0.049485876755377876, 1e-12);
  EXPECT_NEAR(kolmogorov_survival(0.5), 0.9639452436648751, 1e-12);
  EXPECT_DOUBLE_EQ(kolmogorov_survival(0.0), 1.0);
}

TEST(Stats, TwoSampleStatistic) {
  const auto r = ks_two_sample({0.1, 0.4, 0.7, 1.3}, {0.2, 0.3, 0.35, 0.9, 1.5});
  EXPECT_NEAR(r.statistic, 0.35, 1e-15);
}

TEST(Stats, TwoSampleHandlesInfinities) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto r = ks_two_sample({1.0, inf, inf, inf}, {1.0, inf, inf, inf});
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(Stats, OneSampleAgainstOwnLaw) {
  Rng rng(3);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = rng.exponential() / 2.0;
  const auto r = ks_one_sample(xs, [](double x) { return exponential_cdf(2.0, x); });
  EXPECT_GT(r.p_value, 0.001);
  const auto wrong = ks_one_sample(xs, [](double x) { return exponential_cdf(1.0, x); });
  EXPECT_LT(wrong.p_value, 1e-6);
}

TEST(Parallel, DeterministicSlotsAndErrors) {
  std::vector<int> out(100);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 5) throw Error("boom");
                            }),
               Error);
}
