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
#include "hte/dataset.hpp"

#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "hte/error.hpp"
#include "hte/random.hpp"
#include "test_util.hpp"

namespace hte {
namespace {

Schema basic_schema(std::vector<std::string> covariates = {"g"}) {
  Schema s;
  s.unit_column = "id";
  s.arm_column = "arm";
  s.outcome_column = "y";
  s.covariate_columns = std::move(covariates);
  return s;
}

ExperimentDataset parse(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  return load_dataset(in, schema);
}

TEST(LoadDataset, FourRows) {
  const auto ds = parse("id,arm,y,g\na,0,1.5,x\nb,1,2.5,x\nc,0,3,y\nd,1,4,y\n",
                        basic_schema());
  EXPECT_EQ(ds.n_total(), 4u);
  EXPECT_EQ(ds.n_treat(), 2u);
  EXPECT_EQ(ds.n_control(), 2u);
  EXPECT_EQ(ds.unit(1).arm, Arm::kTreatment);
  EXPECT_EQ(ds.unit(2).outcome, 3.0);
  EXPECT_EQ(ds.level(3, 0), "y");
}

TEST(LoadDataset, BadOutcomeCitesLine) {
  try {
    parse("id,arm,y,g\na,0,1,x\nb,1,abc,x\nc,0,3,y\nd,1,4,y\n", basic_schema());
    FAIL() << "expected RowError";
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadDataset, EmptyCovariateBecomesMissingLevel) {
  const auto ds = parse("id,arm,y,g\na,0,1,\nb,1,2,x\nc,0,3,x\nd,1,4,\n",
                        basic_schema());
  EXPECT_EQ(ds.level(0, 0), kMissingLevel);
  EXPECT_EQ(ds.level(3, 0), kMissingLevel);
  const auto strata = build_strata(ds, "g");
  EXPECT_EQ(strata.m_count(), 2u);
  EXPECT_EQ(strata.strata[0].level, "__missing__");
}

TEST(LoadDataset, Errors) {
  EXPECT_THROW(parse("id,arm,y\na,0,1\n", basic_schema()), SchemaError);
  EXPECT_THROW(parse("id,arm,y,g\na,0,1,x\na,1,2,x\nb,0,1,x\nc,1,2,x\n",
                     basic_schema()),
               ValidationError);
  EXPECT_THROW(parse("id,arm,y,g\na,2,1,x\n", basic_schema()), RowError);
  EXPECT_THROW(parse("id,arm,y,g\na,0,inf,x\n", basic_schema()), RowError);
  EXPECT_THROW(parse("id,arm,y,g\na,0,1\n", basic_schema()), RowError);
  EXPECT_THROW(parse("id,arm,y,g\na,0,1,x\nb,1,1,x\nc,1,1,x\n", basic_schema()),
               ValidationError);
  EXPECT_THROW(parse("", basic_schema()), SchemaError);
}

TEST(LoadDataset, AliasesQuotesTabsAndRowIds) {
  Schema s = basic_schema();
  s.unit_column.clear();
  s.delimiter = '\t';
  const auto ds = parse(
      "arm\ty\tg\ncontrol\t1\t\"a b\"\ntreatment\t2\tx\ncontrol\t3\tx\n"
      "treatment\t4\tx\n",
      s);
  EXPECT_EQ(ds.unit(0).unit_id, "1");
  EXPECT_EQ(ds.level(0, 0), "a b");
  EXPECT_EQ(ds.n_treat(), 2u);
}

TEST(LoadDataset, RoundTripIsBitExact) {
  RandomStream rng(8);
  std::vector<UnitRecord> units;
  for (int i = 0; i < 500; ++i) {
    units.push_back({"id" + std::to_string(i),
                     i % 3 ? Arm::kTreatment : Arm::kControl,
                     rng.normal() * 1e6 / (1.0 + i),
                     {std::string(1, static_cast<char>('a' + rng.below(4))),
                      i % 7 ? "p,q" : "r\"s"}});
  }
  const ExperimentDataset ds({"g", "h"}, units);
  std::stringstream buf;
  write_dataset(buf, ds);
  const auto back = load_dataset(buf, round_trip_schema(ds));
  EXPECT_EQ(back, ds);
}

TEST(BuildStrata, CountsAndOrder) {
  std::vector<UnitRecord> units;
  const std::vector<std::string> levels{"b", "a", "b", "b", "a", "b"};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    units.push_back({std::to_string(i), i % 2 ? Arm::kTreatment : Arm::kControl,
                     1.0 * i, {levels[i]}});
  }
  const ExperimentDataset ds({"g"}, units);
  const auto strata = build_strata(ds, "g");
  ASSERT_EQ(strata.m_count(), 2u);
  EXPECT_EQ(strata.strata[0].level, "a");
  EXPECT_EQ(strata.strata[0].size(), 2u);
  EXPECT_EQ(strata.strata[1].size(), 4u);
  EXPECT_THROW(build_strata(ds, "nope"), LookupError);
}

TEST(BuildStrata, SingleLevelAndUnmatched) {
  const auto one = testing::make_dataset({{"only", {1, 2}, {3, 4}}});
  EXPECT_EQ(build_strata(one, "g").m_count(), 1u);

  const auto ds = testing::make_dataset(
      {{"a", {1, 2}, {3, 4}}, {"b", {5, 6, 7}, {}}});
  const auto strata = build_strata(ds, "g");
  ASSERT_EQ(strata.m_count(), 2u);
  EXPECT_FALSE(strata.strata[1].matchable());
  EXPECT_EQ(strata.matchable_count(), 1u);
  EXPECT_EQ(strata.excluded_units(), 3u);
}

TEST(BuildStrata, PartitionProperty) {
  RandomStream rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<UnitRecord> units;
    const std::size_t n = 4 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i) {
      units.push_back({std::to_string(i), i < 2 ? Arm::kControl
                                           : i < 4 ? Arm::kTreatment
                                                   : Arm(rng.below(2)),
                       rng.normal(), {std::to_string(rng.below(6))}});
    }
    const ExperimentDataset ds({"g"}, units);
    const auto strata = build_strata(ds, "g");
    std::vector<int> seen(n);
    for (const auto& s : strata.strata) {
      for (auto i : s.control) {
        ASSERT_EQ(ds.unit(i).arm, Arm::kControl);
        ++seen[i];
      }
      for (auto i : s.treatment) {
        ASSERT_EQ(ds.unit(i).arm, Arm::kTreatment);
        ++seen[i];
      }
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

}  // namespace
}  // namespace hte
