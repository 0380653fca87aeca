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
#include "hte/sim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "hte/detect.hpp"
#include "hte/error.hpp"
#include "hte/parallel.hpp"
#include "hte/random.hpp"
#include "hte/stats.hpp"
#include "hte/surface.hpp"
#include "test_util.hpp"

namespace hte {
namespace {

// Recovers the control-outcome error e_i of every unit in one stratum.
std::vector<double> control_errors(const R2Dataset& sim, const R2BoundParams& params,
                                   std::size_t stratum, std::size_t offset) {
  std::vector<double> e;
  for (std::size_t i = 0; i < params.stratum_sizes[stratum]; ++i) {
    const auto& u = sim.data.unit(offset + i);
    const double treated = u.arm == Arm::kTreatment ? sim.true_tau[offset + i] : 0.0;
    e.push_back(u.outcome - params.control_means[stratum] - treated);
  }
  return e;
}

TEST(Copula, MarginalFidelity) {
  R2BoundParams params;
  params.stratum_sizes = {100000, 100000, 100000, 100000};
  for (double r : {0.0, 0.5, 1.0}) {
    const auto sim = generate_r2_dataset(params, r, 17);
    std::size_t offset = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t n = params.stratum_sizes[j];
      std::vector<double> eps;
      for (std::size_t i = 0; i < n; ++i) {
        eps.push_back(sim.true_tau[offset + i] - params.effect_means[j]);
      }
      const double mu = params.epsilon_means[j];
      const double target = mu + params.epsilon_dispersion * mu * mu;
      const double se = std::sqrt(target / static_cast<double>(n));
      EXPECT_LE(std::fabs(stats::mean(eps)), 3.0 * se) << r << " " << j;
      EXPECT_NEAR(stats::variance(eps) / target, 1.0, 0.03) << r << " " << j;

      const auto e = control_errors(sim, params, j, offset);
      const double e_var = params.error_mean + params.error_dispersion * 900.0;
      EXPECT_NEAR(stats::mean(e), params.error_mean, 3.0 * std::sqrt(e_var / n));
      offset += n;
    }
  }
}

TEST(Copula, DependenceIncreasesWithCorrelation) {
  R2BoundParams params;
  params.levels = {"s"};
  params.stratum_sizes = {1000000};
  params.control_means = {0.0};
  params.effect_means = {5.0};
  params.epsilon_means = {5.0};
  std::vector<double> rho;
  for (double r : {0.0, 0.5, 1.0}) {
    const auto sim = generate_r2_dataset(params, r, 23);
    rho.push_back(testing::spearman(control_errors(sim, params, 0, 0), sim.true_tau));
  }
  EXPECT_LT(std::fabs(rho[0]), 0.01);
  EXPECT_LT(rho[0], rho[1]);
  EXPECT_LT(rho[1], rho[2]);
  EXPECT_GT(rho[2], 0.95);
}

TEST(Copula, TrueR2AndCates) {
  R2BoundParams params;
  const auto sim = generate_r2_dataset(params, 0.5, 31);
  EXPECT_EQ(sim.data.n_total(), 40000u);
  EXPECT_GT(sim.true_r2, 0.1);
  EXPECT_LT(sim.true_r2, 0.3);
  const auto cates = fit_conditional_means(sim.data, build_strata(sim.data, "stratum"));
  for (std::size_t j = 0; j < 4; ++j) {
    const double mu = params.epsilon_means[j];
    const double sd = std::sqrt(params.error_mean + 0.5 * 900.0 + mu + 0.5 * mu * mu);
    const double se = sd * std::sqrt(2.0 / 5000.0);
    EXPECT_NEAR(cates.rows[j].cate, sim.true_cate[j], 4.0 * se) << j;
    EXPECT_NEAR(sim.true_cate[j], params.effect_means[j], 0.2) << j;
  }
  EXPECT_NEAR(true_r2({1, 1, 3, 3}, {2, 2}), 1.0, 1e-15);
  EXPECT_EQ(true_r2({1, 2, 1, 2}, {2, 2}), 0.0);
}

TEST(Copula, EqualStrataExplainNothing) {
  R2BoundParams params;
  params.effect_means = {4, 4, 4, 4};
  params.epsilon_means = {4, 4, 4, 4};
  const auto sim = generate_r2_dataset(params, 0.0, 41);
  const auto r = r2_upper_bound(sim.data, "stratum");
  // Only CATE sampling noise is left in the explained term; with r = 0 the
  // idiosyncratic lower bound is itself small, so the ratio stays modest.
  EXPECT_LT(r.explained_tev, 0.05 * stats::variance(sim.true_tau));
  EXPECT_LT(r.r2_upper, 0.15);
  EXPECT_LT(sim.true_r2, 0.01);
}

TEST(DetectionData, CommonRandomNumbers) {
  DetectionPowerParams params;
  params.n_units = 1000;
  const auto a = generate_detection_data(params, 0.0, 5);
  const auto b = generate_detection_data(params, 0.1, 5);
  EXPECT_EQ(a.control, b.control);
  EXPECT_EQ(a.treatment.size(), 500u);

  params.pre_period_adjust = false;
  const auto raw = generate_detection_data(params, 0.0, 5);
  EXPECT_GT(stats::mean(raw.control), 150.0);
}

TEST(DetectionPower, AaPValuesAreUniform) {
  DetectionPowerParams params;
  params.n_units = 10000;
  std::vector<double> p;
  for (std::uint64_t rep = 0; rep < 500; ++rep) {
    // sigma = 0 is the constant-effect null; the shift is irrelevant to the
    // variance test.
    const auto d = generate_detection_data(params, 0.0, derive_seed(99, rep));
    p.push_back(kurtosis_logvar_test(d.treatment, d.control).p_value);
  }
  const double d = testing::ks_uniform_distance(p);
  EXPECT_GT(testing::kolmogorov_p_value(d, p.size()), 0.01);
}

SimScenario small_power_scenario() {
  SimScenario s;
  s.kind = ScenarioKind::kDetectionPower;
  s.seed = 8;
  s.replications = 12;
  s.detection.n_units = 600;
  s.detection.sigma_grid = {0.0, 0.15};
  s.detection.frt_permutations = 100;
  s.detection.frt_grid = 5;
  s.detection.bootstraps = 50;
  return s;
}

TEST(DetectionPower, TableShapeAndDeterminism) {
  const auto s = small_power_scenario();
  set_thread_count(1);
  const auto a = run_detection_power_study(s);
  set_thread_count(3);
  const auto b = run_detection_power_study(s);
  set_thread_count(1);
  ASSERT_EQ(a.cells.size(), 6u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].p_values, b.cells[i].p_values);
    EXPECT_EQ(a.cells[i].rejection_rate, b.cells[i].rejection_rate);
  }
  EXPECT_EQ(a.at(DetectionMethod::kFrtKs, 1).sigma, 0.15);
  EXPECT_EQ(a.at(DetectionMethod::kKurtosis, 1).rejection_rate, 1.0);
  EXPECT_THROW(a.at(DetectionMethod::kKurtosis, 2), LookupError);
}

TEST(R2Study, DeterministicAcrossThreads) {
  SimScenario s;
  s.kind = ScenarioKind::kR2Bound;
  s.replications = 3;
  s.r2.stratum_sizes = {500, 500, 500, 500};
  s.r2.correlations = {0.0, 1.0};
  set_thread_count(1);
  const auto a = run_r2_bound_study(s);
  set_thread_count(4);
  const auto b = run_r2_bound_study(s);
  set_thread_count(1);
  ASSERT_EQ(a.mean.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.mean[i].stratified, b.mean[i].stratified);
    EXPECT_EQ(a.mean[i].unstratified, b.mean[i].unstratified);
    EXPECT_EQ(a.mean[i].true_r2, b.mean[i].true_r2);
  }
}

TEST(SimScenario, Validation) {
  SimScenario s;
  EXPECT_NO_THROW(s.validate());
  s.detection.sigma_grid = {-0.1};
  EXPECT_THROW(s.validate(), ParameterError);
  s = SimScenario{};
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), ParameterError);
  s = SimScenario{};
  s.kind = ScenarioKind::kR2Bound;
  s.r2.correlations = {1.5};
  EXPECT_THROW(s.validate(), ParameterError);
  s.r2.correlations = {0.5};
  s.r2.levels.pop_back();
  EXPECT_THROW(s.validate(), ParameterError);
  EXPECT_THROW(run_detection_power_study(s), ParameterError);
}

}  // namespace
}  // namespace hte
