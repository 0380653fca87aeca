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
#ifndef HTE_DETECT_HPP_
#define HTE_DETECT_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hte/dataset.hpp"

namespace hte {

enum class DetectionMethod { kKurtosis, kBootstrapF, kFrtKs };

std::string_view to_string(DetectionMethod method) noexcept;
// Accepts "kurtosis", "bootstrap_f"/"bootstrap-f", "frt_ks"/"frt".
DetectionMethod parse_detection_method(std::string_view name);

// Outcome of one global heterogeneity test on one metric. Moment fields are
// filled for every method.
struct DetectionResult {
  DetectionMethod method = DetectionMethod::kKurtosis;
  double statistic = 0.0;
  double p_value = 1.0;
  double var_treat = 0.0;
  double var_control = 0.0;
  double kurt_treat = 0.0;
  double kurt_control = 0.0;
  std::size_t n_treat = 0;
  std::size_t n_control = 0;

  // FRT only: the constant-effect grid and the permutation p-value at each
  // point. `statistic` is the KS distance at the grid point with maximal p.
  std::vector<double> grid_shifts;
  std::vector<double> grid_p_values;
};

struct BootstrapOptions {
  std::size_t bootstraps = 200;
  std::uint64_t seed = 0;
};

struct FrtOptions {
  std::size_t permutations = 1000;
  std::size_t grid_size = 21;
  std::uint64_t seed = 0;
};

// Log-variance test with kurtosis-corrected standard error:
//   t = (log s1^2 - log s0^2) / sqrt((k1 - 1)/N1 + (k0 - 1)/N0),
// two-sided normal p-value. s^2 uses n - 1, k uses population moments.
DetectionResult kurtosis_logvar_test(std::span<const double> treatment,
                                     std::span<const double> control);
DetectionResult kurtosis_logvar_test(const ExperimentDataset& ds);

// F-test on the variances of bootstrap means (one collection per arm),
// referred to F(b - 1, b - 1), two-sided.
DetectionResult bootstrap_f_test(std::span<const double> treatment,
                                 std::span<const double> control,
                                 const BootstrapOptions& options);
DetectionResult bootstrap_f_test(const ExperimentDataset& ds,
                                 const BootstrapOptions& options);

// Fisher randomization test of the constant-effect null using the two-sample
// KS statistic, maximising the p-value over a grid of candidate effects that
// spans the 99.9% confidence interval of the difference in means.
DetectionResult frt_ks_test(std::span<const double> treatment,
                            std::span<const double> control,
                            const FrtOptions& options);
DetectionResult frt_ks_test(const ExperimentDataset& ds,
                            const FrtOptions& options);

struct LabeledPValue {
  std::string label;
  double p_value = 1.0;
};

struct FdrReport {
  std::vector<LabeledPValue> inputs;
  double alpha = 0.05;
  std::vector<std::string> rejected;  // input order
  double threshold = 0.0;             // largest accepted p-value, 0 if none
};

// Benjamini-Hochberg step-up procedure.
FdrReport bh_adjust(std::vector<LabeledPValue> pvalues, double alpha);

// Step-up threshold alone; 0 when nothing is rejected. Validates inputs like
// bh_adjust.
double bh_threshold(std::span<const double> pvalues, double alpha);

}  // namespace hte

#endif  // HTE_DETECT_HPP_
