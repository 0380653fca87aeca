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
#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "hte/random.hpp"
#include "hte/surface.hpp"

namespace hte {
namespace {

// A random nondecreasing map of sorted inputs, built from nonnegative
// increments; ties in x share one image.
std::vector<double> random_monotone_image(const std::vector<double>& x,
                                          RandomStream& rng) {
  std::vector<double> y(x.size());
  double level = rng.normal() * 10.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0 && x[i] != x[i - 1]) {
      level += rng.below(4) == 0 ? 0.0 : rng.gamma(0.7, 2.0);
    }
    y[i] = level;
  }
  return y;
}

TEST(RankPreservation, GlobalImpliesLocal) {
  RandomStream rng(2718);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(rng.below(n)) - 0.5 * static_cast<double>(n);
    std::sort(x.begin(), x.end());
    const auto fx = random_monotone_image(x, rng);
    ASSERT_TRUE(is_globally_rank_preserving(x, fx));
    std::vector<int> cells(n);
    const int parts = 1 + static_cast<int>(rng.below(8));
    for (auto& c : cells) c = static_cast<int>(rng.below(parts));
    ASSERT_TRUE(is_locally_rank_preserving(x, fx, cells)) << trial;
  }
}

TEST(RankPreservation, LocalDoesNotImplyGlobal) {
  // P_k lies strictly below P_j and is positive; g lifts P_k by sup(P_j).
  const std::vector<double> pk{0.5, 1.0, 2.0, 3.5};
  const std::vector<double> pj{5.0, 6.0, 8.0};
  const double sup_j = *std::max_element(pj.begin(), pj.end());
  std::vector<double> x, gx;
  std::vector<int> cells;
  for (double v : pk) {
    x.push_back(v);
    gx.push_back(v + sup_j);
    cells.push_back(0);
  }
  for (double v : pj) {
    x.push_back(v);
    gx.push_back(v);
    cells.push_back(1);
  }
  EXPECT_TRUE(is_locally_rank_preserving(x, gx, cells));
  EXPECT_FALSE(is_globally_rank_preserving(x, gx));
  for (std::size_t a = 0; a < pk.size(); ++a) {
    for (std::size_t b = pk.size(); b < x.size(); ++b) {
      EXPECT_GE(x[b], x[a]);
      EXPECT_LT(gx[b], gx[a]);
      const std::vector<double> px{x[a], x[b]};
      const std::vector<double> pg{gx[a], gx[b]};
      EXPECT_FALSE(is_globally_rank_preserving(px, pg));
    }
  }
}

}  // namespace
}  // namespace hte
