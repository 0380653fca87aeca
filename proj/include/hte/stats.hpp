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
#ifndef HTE_STATS_HPP_
#define HTE_STATS_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace hte::stats {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double sum(std::span<const double> xs) noexcept;
double mean(std::span<const double> xs) noexcept;
// Sample variance with the n - 1 denominator; 0 for fewer than two values.
double variance(std::span<const double> xs) noexcept;

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator
  double m2 = 0.0;        // population central moments (1/n)
  double m4 = 0.0;
  double kurtosis = 0.0;  // m4 / m2^2, 0 when m2 == 0
};

// Two-pass moments. Results depend on the order of `xs`; callers that need
// order-invariant output pass sorted data.
Moments moments(std::span<const double> xs) noexcept;

// Type-7 quantile (linear interpolation of order statistics) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

double normal_cdf(double x) noexcept;
double normal_quantile(double p);
// 2 * Phi(-|z|).
double two_sided_normal_p(double z) noexcept;
// Upper tail of the F(d1, d2) distribution.
double f_upper_tail(double x, double d1, double d2);

// Sup-distance between the empirical CDFs of two sorted samples.
double ks_statistic_sorted(std::span<const double> a,
                           std::span<const double> b) noexcept;

}  // namespace hte::stats

#endif  // HTE_STATS_HPP_
