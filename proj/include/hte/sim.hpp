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
#ifndef HTE_SIM_HPP_
#define HTE_SIM_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hte/dataset.hpp"
#include "hte/detect.hpp"

namespace hte {

// Draws from the gamma-Poisson mixture with E = mean and
// Var = mean + dispersion * mean^2. Deterministic per seed.
std::vector<std::uint64_t> sample_negbin(double mean, double dispersion,
                                         std::size_t n, std::uint64_t seed);

// Inverse CDF of the same negative binomial by table lookup. The cumulative
// table stops at the 1 - 1e-12 quantile; larger u map to its last entry.
class NegativeBinomialQuantile {
 public:
  NegativeBinomialQuantile(double mean, double dispersion);

  std::uint64_t operator()(double u) const noexcept;
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;
  std::size_t table_size() const noexcept { return cdf_.size(); }

 private:
  double mean_;
  double dispersion_;
  std::vector<double> cdf_;
};

enum class ScenarioKind { kDetectionPower, kR2Bound };

std::string_view to_string(ScenarioKind kind) noexcept;

struct DetectionPowerParams {
  std::size_t n_units = 5000;  // total, split evenly between arms
  double nb_mean = 200.0;
  double nb_dispersion = 0.15;
  double lognormal_log_mean = 2.0;
  std::vector<double> sigma_grid = {0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15};
  std::size_t bootstraps = 200;
  std::size_t frt_permutations = 1000;
  std::size_t frt_grid = 21;
  bool apply_bh = true;
  // Test the AB-period outcome net of the AA-period value instead of the
  // raw AB outcome.
  bool pre_period_adjust = true;
  std::vector<DetectionMethod> methods = {DetectionMethod::kKurtosis,
                                          DetectionMethod::kBootstrapF,
                                          DetectionMethod::kFrtKs};
};

struct R2BoundParams {
  std::vector<std::string> levels = {"s1", "s2", "s3", "s4"};
  std::vector<std::size_t> stratum_sizes = {10000, 10000, 10000, 10000};
  std::vector<double> control_means = {0.0, 10.0, 20.0, 30.0};   // X'gamma
  std::vector<double> effect_means = {2.0, 4.0, 6.0, 8.0};      // X'beta
  std::vector<double> epsilon_means = {2.0, 4.0, 6.0, 8.0};     // mu_j
  double epsilon_dispersion = 0.5;
  double error_mean = 30.0;  // e_i ~ NB(error_mean, error_dispersion)
  double error_dispersion = 0.5;
  std::vector<double> correlations = {0.0, 0.25, 0.5, 0.75, 1.0};
  double treat_fraction = 0.5;
};

struct SimScenario {
  ScenarioKind kind = ScenarioKind::kDetectionPower;
  std::uint64_t seed = 0;
  std::size_t replications = 200;
  double alpha = 0.05;
  DetectionPowerParams detection;
  R2BoundParams r2;

  // Throws ParameterError naming the offending field.
  void validate() const;
};

// One generated detection-power dataset: control then treatment outcomes.
struct ArmSamples {
  std::vector<double> treatment;
  std::vector<double> control;
};

ArmSamples generate_detection_data(const DetectionPowerParams& params,
                                   double sigma, std::uint64_t seed);

struct PowerCell {
  DetectionMethod method;
  double sigma = 0.0;
  double rejection_rate = 0.0;
  std::vector<double> p_values;  // one per replication
};

struct PowerTable {
  double alpha = 0.05;
  bool bh_applied = true;
  std::size_t replications = 0;
  std::vector<PowerCell> cells;  // method-major, sigma-minor

  const PowerCell& at(DetectionMethod method, std::size_t sigma_index) const;
};

PowerTable run_detection_power_study(const SimScenario& scenario);

// Generated copula experiment with its ground truth.
struct R2Dataset {
  ExperimentDataset data;
  std::vector<double> true_tau;   // per unit
  std::vector<double> true_cate;  // per level
  double true_r2 = 0.0;
};

R2Dataset generate_r2_dataset(const R2BoundParams& params, double correlation,
                              std::uint64_t seed);

// Unit-weighted variance of the per-stratum mean of `tau` over the variance
// of `tau` (both n - 1).
double true_r2(const std::vector<double>& tau,
               const std::vector<std::size_t>& stratum_sizes);

struct R2BoundRow {
  double correlation = 0.0;
  double true_r2 = 0.0;
  double stratified = 0.0;
  double unstratified = 0.0;
};

struct R2BoundTable {
  std::vector<R2BoundRow> mean;          // per correlation, over replications
  std::vector<std::vector<R2BoundRow>> replicates;  // [correlation][rep]
};

R2BoundTable run_r2_bound_study(const SimScenario& scenario);

}  // namespace hte

#endif  // HTE_SIM_HPP_
