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
#include "hte/surface.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "hte/error.hpp"
#include "hte/parallel.hpp"
#include "hte/random.hpp"
#include "hte/sim.hpp"
#include "hte/stats.hpp"
#include "test_util.hpp"

namespace hte {
namespace {

using testing::make_dataset;

// Stratum "a" has N0 = 3, N1 = 5; stratum "b" has a constant shift.
ExperimentDataset hand_fixture() {
  return make_dataset({{"a", {1, 2, 6}, {2, 4, 5, 9, 10}}, {"b", {10, 12}, {15, 17}}});
}

TEST(ConditionalMeans, SingleStratum) {
  const auto ds = make_dataset({{"x", {1, 3}, {4, 6}}});
  const auto table = fit_conditional_means(ds, build_strata(ds, "g"));
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0].mean_control, 2.0);
  EXPECT_EQ(table.rows[0].mean_treat, 5.0);
  EXPECT_EQ(table.rows[0].cate, 3.0);
}

TEST(ConditionalMeans, EqualCatesGiveZeroExplained) {
  const auto same = make_dataset({{"a", {1, 3}, {4, 6}}, {"b", {10, 20}, {13, 23}}});
  EXPECT_EQ(explained_tev(fit_conditional_means(same, build_strata(same, "g"))), 0.0);
}

TEST(ConditionalMeans, UnmatchableStrataAreDropped) {
  const auto ds = make_dataset({{"a", {1, 3}, {4, 6}}, {"b", {1, 2, 3}, {}}});
  const auto table = fit_conditional_means(ds, build_strata(ds, "g"));
  EXPECT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.excluded_units, 3u);
  const auto lone = make_dataset({{"a", {1, 3}, {}}, {"b", {}, {2, 4}}});
  EXPECT_THROW(fit_conditional_means(lone, build_strata(lone, "g")), AnalysisError);
}

TEST(RankMap, PublishedExample) {
  const std::vector<std::size_t> expected{1, 2, 2, 3, 3};
  for (std::size_t k = 1; k <= 5; ++k) EXPECT_EQ(rank_map(k, 5, 3), expected[k - 1]);
}

TEST(RankMap, IdentityWhenArmsAreEqual) {
  for (std::size_t n = 1; n <= 200; ++n) {
    for (std::size_t k = 1; k <= n; ++k) ASSERT_EQ(rank_map(k, n, n), k);
  }
}

TEST(RankMap, LastRankMapsToLastAndStaysInRange) {
  for (std::size_t n_large = 1; n_large <= 500; ++n_large) {
    for (std::size_t n_min = 1; n_min <= n_large; ++n_min) {
      ASSERT_EQ(rank_map(n_large, n_large, n_min), n_min);
      ASSERT_EQ(rank_map(1, n_large, n_min), 1u);
    }
  }
  EXPECT_EQ(rank_map(4'000'000'000ull, 4'000'000'000ull, 3'999'999'999ull),
            3'999'999'999ull);
}

TEST(MatchResiduals, IdenticalMarginalsCancel) {
  const auto m = match_sorted_residuals(std::vector<double>{-1, 1}, std::vector<double>{-1, 1});
  for (double d : m.control_difference) EXPECT_EQ(d, 0.0);
  for (double d : m.treatment_difference) EXPECT_EQ(d, 0.0);
}

TEST(MatchResiduals, HandTrace) {
  const auto ds = hand_fixture();
  const auto strata = build_strata(ds, "g");
  const auto cates = fit_conditional_means(ds, strata);
  const auto match = match_residuals(ds, strata, cates);
  const std::vector<double> residual{-2, -1, 3, -4, -2, -1, 3, 4, -1, 1, -1, 1};
  const std::vector<double> counterpart{-4, -1.5, 3.5, -2, -1, -1, 3, 3, -1, 1, -1, 1};
  const std::vector<double> difference{-2, -0.5, 0.5, -2, -1, 0, 0, 1, 0, 0, 0, 0};
  for (std::size_t i = 0; i < residual.size(); ++i) {
    EXPECT_NEAR(match.residual[i], residual[i], 1e-12) << i;
    EXPECT_NEAR(match.counterpart[i], counterpart[i], 1e-12) << i;
    EXPECT_NEAR(match.difference[i], difference[i], 1e-12) << i;
  }
  EXPECT_NEAR(idiosyncratic_tev_bound(match), 10.5 / 11.0, 1e-12);
  EXPECT_NEAR(explained_tev(cates), 32.0 / 33.0, 1e-12);
  const auto r = r2_upper_bound(ds, "g");
  EXPECT_NEAR(r.r2_upper, 64.0 / 127.0, 1e-12);

  const auto pooled = r2_upper_bound(ds, "g", BoundMode::kUnstratified);
  EXPECT_NEAR(pooled.idio_tev_lower, 16.25 / 11.0, 1e-12);
  EXPECT_NEAR(pooled.r2_upper, 32.0 / 80.75, 1e-12);
}

TEST(MatchResiduals, ArmResidualsSumToZero) {
  RandomStream rng(3);
  std::vector<testing::Cell> cells;
  for (int s = 0; s < 5; ++s) {
    testing::Cell c{"s" + std::to_string(s), {}, {}};
    for (int i = 0; i < 100 + 37 * s; ++i) c.control.push_back(1e4 + rng.normal() * 50);
    for (int i = 0; i < 80 + 53 * s; ++i) c.treatment.push_back(1e4 + rng.normal() * 70);
    cells.push_back(c);
  }
  const auto ds = make_dataset(cells);
  const auto strata = build_strata(ds, "g");
  const auto match = match_residuals(ds, strata, fit_conditional_means(ds, strata));
  for (const auto& s : strata.strata) {
    stats::CompensatedSum c, t;
    for (auto i : s.control) c.add(match.residual[i]);
    for (auto i : s.treatment) t.add(match.residual[i]);
    EXPECT_LE(std::fabs(c.value()), 1e-9 * s.size() * 70);
    EXPECT_LE(std::fabs(t.value()), 1e-9 * s.size() * 70);
  }
}

TEST(MatchResiduals, CounterpartsAreMonotoneInOwnRank) {
  RandomStream rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> c(1 + rng.below(40)), t(1 + rng.below(40));
    for (auto& v : c) v = rng.normal();
    for (auto& v : t) v = 2.0 * rng.normal();
    std::sort(c.begin(), c.end());
    std::sort(t.begin(), t.end());
    const auto m = match_sorted_residuals(c, t);
    ASSERT_TRUE(std::is_sorted(m.control_counterpart.begin(), m.control_counterpart.end()));
    ASSERT_TRUE(std::is_sorted(m.treatment_counterpart.begin(), m.treatment_counterpart.end()));
  }
}

TEST(MatchResiduals, TreatmentShiftPassesThrough) {
  RandomStream rng(10);
  std::vector<double> c(7), t(11);
  for (auto& v : c) v = rng.normal();
  for (auto& v : t) v = rng.normal();
  std::sort(c.begin(), c.end());
  std::sort(t.begin(), t.end());
  const auto base = match_sorted_residuals(c, t);
  std::vector<double> shifted = t;
  for (auto& v : shifted) v += 2.5;
  const auto moved = match_sorted_residuals(c, shifted);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(moved.control_difference[i], base.control_difference[i] + 2.5, 1e-12);
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(moved.treatment_difference[i], base.treatment_difference[i] + 2.5, 1e-12);
  }
}

TEST(IdiosyncraticBound, Formula) {
  ResidualMatch m;
  m.difference = {1, -1, 1, -1};
  m.order = {0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(idiosyncratic_tev_bound(m), 4.0 / 3.0);
  m.difference = {0, 0, 0, 0};
  EXPECT_EQ(idiosyncratic_tev_bound(m), 0.0);
  m.order = {0};
  EXPECT_THROW(idiosyncratic_tev_bound(m), AnalysisError);
}

TEST(IdiosyncraticBound, MatchesQuantileQuadrature) {
  RandomStream rng(21);
  std::vector<double> c(10000), t(10000);
  for (auto& v : c) v = rng.normal();
  for (auto& v : t) v = rng.gamma(2.0, 1.0);
  const auto ds = make_dataset({{"one", c, t}});
  const auto strata = build_strata(ds, "g");
  const auto match = match_residuals(ds, strata, fit_conditional_means(ds, strata));
  std::vector<double> rc, rt;
  for (auto i : strata.strata[0].control) rc.push_back(match.residual[i]);
  for (auto i : strata.strata[0].treatment) rt.push_back(match.residual[i]);
  const double quad = testing::quantile_gap_integral(rt, rc, 200000);
  const double bound = idiosyncratic_tev_bound(match);
  EXPECT_NEAR(bound / quad, 1.0, 0.02);
}

TEST(R2Bound, ConstantCateGivesZero) {
  const auto ds = make_dataset({{"a", {1, 5, 3}, {4, 9, 3, 8}}, {"b", {11, 15}, {14, 18, 16}}});
  const auto strata = build_strata(ds, "g");
  const auto cates = fit_conditional_means(ds, strata);
  ASSERT_DOUBLE_EQ(cates.rows[0].cate, cates.rows[1].cate);
  const auto r = r2_upper_bound(ds, "g");
  EXPECT_EQ(r.explained_tev, 0.0);
  EXPECT_EQ(r.r2_upper, 0.0);
}

TEST(R2Bound, PartsCombination) {
  EXPECT_EQ(r2_from_parts(0.0, 0.0), 0.0);
  EXPECT_EQ(r2_from_parts(2.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(r2_from_parts(1.0, 3.0), 0.25);
}

ExperimentDataset noisy_strata(std::uint64_t seed, int levels, double cate_step) {
  RandomStream rng(seed);
  std::vector<testing::Cell> cells;
  for (int s = 0; s < levels; ++s) {
    testing::Cell c{"L" + std::to_string(s), {}, {}};
    const auto nc = 30 + rng.below(40);
    const auto nt = 30 + rng.below(40);
    for (std::size_t i = 0; i < nc; ++i) c.control.push_back(std::round(rng.normal() * 4));
    for (std::size_t i = 0; i < nt; ++i) {
      c.treatment.push_back(std::round(rng.normal() * 5) + cate_step * s);
    }
    cells.push_back(c);
  }
  return make_dataset(cells);
}

TEST(R2Bound, SingleLevelEqualsUnstratified) {
  const auto ds = noisy_strata(31, 1, 0.0);
  const auto a = r2_upper_bound(ds, "g", BoundMode::kStratified);
  const auto b = r2_upper_bound(ds, "g", BoundMode::kUnstratified);
  EXPECT_EQ(a.explained_tev, b.explained_tev);
  EXPECT_EQ(a.idio_tev_lower, b.idio_tev_lower);
  EXPECT_EQ(a.r2_upper, b.r2_upper);
}

TEST(R2Bound, UnitOrderDoesNotMatter) {
  const auto ds = noisy_strata(32, 4, 1.5);
  auto units = ds.units();
  RandomStream rng(1);
  std::shuffle(units.begin(), units.end(), rng);
  const ExperimentDataset shuffled(ds.covariate_names(), units);
  for (auto mode : {BoundMode::kStratified, BoundMode::kUnstratified}) {
    const auto a = r2_upper_bound(ds, "g", mode);
    const auto b = r2_upper_bound(shuffled, "g", mode);
    EXPECT_EQ(a.explained_tev, b.explained_tev);
    EXPECT_EQ(a.idio_tev_lower, b.idio_tev_lower);
    EXPECT_EQ(a.r2_upper, b.r2_upper);
  }
}

TEST(R2Bound, AffineInvariance) {
  const auto ds = noisy_strata(33, 3, 2.0);
  const auto base = r2_upper_bound(ds, "g");
  for (auto [shift, scale] : {std::pair{1000.0, 1.0}, std::pair{0.0, 3.0},
                              std::pair{-7.0, 0.25}}) {
    auto units = ds.units();
    for (auto& u : units) u.outcome = scale * u.outcome + shift;
    const auto r = r2_upper_bound(ExperimentDataset(ds.covariate_names(), units), "g");
    EXPECT_NEAR(r.r2_upper, base.r2_upper, 1e-9);
  }
}

TEST(R2Bound, ExcludesUnmatchedStrata) {
  const auto ds = make_dataset({{"a", {1, 3, 2}, {4, 6, 9}}, {"b", {1, 2}, {}},
                                {"c", {5, 1}, {9, 9, 1}}});
  const auto r = r2_upper_bound(ds, "g");
  EXPECT_EQ(r.excluded_units, 2u);
  EXPECT_EQ(r.matched_units, 11u);
}

TEST(RankBreakdowns, InformativeCovariateFirst) {
  RandomStream rng(44);
  std::vector<UnitRecord> units;
  for (int i = 0; i < 4000; ++i) {
    const auto a = rng.below(4);
    const auto b = rng.below(3);
    const bool treated = rng.below(2) == 1;
    const double y = rng.normal() + (treated ? 2.0 * static_cast<double>(a) : 0.0);
    units.push_back({std::to_string(i), treated ? Arm::kTreatment : Arm::kControl, y,
                     {"A" + std::to_string(a), "B" + std::to_string(b)}});
  }
  const ExperimentDataset ds({"A", "B"}, units);
  const auto ranked = rank_breakdowns(ds, {"B", "A"});
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].breakdown, "A");
  EXPECT_GT(ranked[0].r2_upper, ranked[1].r2_upper);
  EXPECT_EQ(rank_breakdowns(ds, {"B"}).size(), 1u);
  EXPECT_THROW(rank_breakdowns(ds, {"C"}), LookupError);

  set_thread_count(3);
  const auto threaded = rank_breakdowns(ds, {"B", "A"});
  set_thread_count(1);
  EXPECT_EQ(threaded[0].r2_upper, ranked[0].r2_upper);
  EXPECT_EQ(threaded[1].idio_tev_lower, ranked[1].idio_tev_lower);
}

TEST(R2Bound, BoundedByTrueTotalVariation) {
  // Matching two finite random halves adds sampling noise to the quantile
  // gap, so at r = 1, where the bound is attained, the estimate sits a
  // little above the truth; the excess shrinks with n.
  R2BoundParams params;
  params.stratum_sizes = {100000, 100000, 100000, 100000};
  for (double r : {0.0, 0.5, 1.0}) {
    const auto sim = generate_r2_dataset(params, r, 77);
    const auto res = r2_upper_bound(sim.data, "stratum");
    const double total = stats::variance(sim.true_tau);
    EXPECT_LE(res.explained_tev + res.idio_tev_lower, total * 1.03) << r;
  }
}

TEST(BoundMode, Names) {
  EXPECT_EQ(parse_bound_mode("unstratified"), BoundMode::kUnstratified);
  EXPECT_EQ(to_string(BoundMode::kStratified), "stratified");
  EXPECT_THROW(parse_bound_mode("both"), ParameterError);
}

}  // namespace
}  // namespace hte
