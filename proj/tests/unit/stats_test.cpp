/*
 * Copyright 2026 The hte Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "hte/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "hte/random.hpp"

namespace hte::stats {
namespace {

TEST(CompensatedSum, RecoversCancelledTerms) {
  CompensatedSum s;
  for (double x : {1e16, 1.0, -1e16, 1.0}) s.add(x);
  EXPECT_EQ(s.value(), 2.0);
}

TEST(Variance, LargeOffsetIsStable) {
  std::vector<double> x;
  for (int i = 0; i < 1000; ++i) x.push_back(1e9 + (i % 2 ? 1.0 : -1.0));
  EXPECT_NEAR(variance(x), 1000.0 / 999.0, 1e-9);
}

TEST(Moments, KnownValues) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = moments(x);
  EXPECT_EQ(m.n, 4u);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.m2, 1.25);
  EXPECT_DOUBLE_EQ(m.m4, (2 * 5.0625 + 2 * 0.0625) / 4);
  EXPECT_DOUBLE_EQ(m.kurtosis, m.m4 / (1.25 * 1.25));
  EXPECT_EQ(moments(std::vector<double>{3, 3, 3}).kurtosis, 0.0);
}

TEST(Quantile, TypeSeven) {
  const std::vector<double> x{1, 2, 3, 4, 10};
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.9), 4.0 + 0.6 * 6.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.1), 1.4);
}

TEST(Normal, CdfAndQuantile) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
  EXPECT_NEAR(normal_quantile(0.9995), 3.2905267314918945, 1e-12);
  EXPECT_DOUBLE_EQ(two_sided_normal_p(0.0), 1.0);
  EXPECT_NEAR(two_sided_normal_p(-1.959963984540054), 0.05, 1e-14);
}

TEST(FDistribution, UpperTail) {
  EXPECT_NEAR(f_upper_tail(1.0, 7.0, 7.0), 0.5, 1e-14);
  // F(1, d) is t^2 with d degrees of freedom: P(|t_10| > 2.228138851986) = 0.05.
  EXPECT_NEAR(f_upper_tail(2.228138851986 * 2.228138851986, 1.0, 10.0), 0.05, 1e-9);
}

double brute_ks(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double d = 0.0;
  for (double t : pts) {
    const double fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; }) /
                      static_cast<double>(a.size());
    const double fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; }) /
                      static_cast<double>(b.size());
    d = std::max(d, std::fabs(fa - fb));
  }
  return d;
}

TEST(KolmogorovSmirnov, MatchesBruteForceWithTies) {
  RandomStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.below(30));
    std::vector<double> b(1 + rng.below(30));
    for (auto& v : a) v = static_cast<double>(rng.below(8));
    for (auto& v : b) v = static_cast<double>(rng.below(8));
    const double expected = brute_ks(a, b);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_NEAR(ks_statistic_sorted(a, b), expected, 1e-15);
  }
}

}  // namespace
}  // namespace hte::stats
