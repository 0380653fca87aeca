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

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include "hte/error.hpp"

namespace hte::stats {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

double sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

double mean(std::span<const double> xs) noexcept {
  if (xs.empty()) return 0.0;
  return sum(xs) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) noexcept {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  CompensatedSum acc;
  for (double x : xs) {
    const double d = x - mu;
    acc.add(d * d);
  }
  return acc.value() / static_cast<double>(xs.size() - 1);
}

Moments moments(std::span<const double> xs) noexcept {
  Moments out;
  out.n = xs.size();
  if (xs.empty()) return out;
  out.mean = mean(xs);
  CompensatedSum s2;
  CompensatedSum s4;
  for (double x : xs) {
    const double d = x - out.mean;
    const double d2 = d * d;
    s2.add(d2);
    s4.add(d2 * d2);
  }
  const auto n = static_cast<double>(xs.size());
  out.m2 = s2.value() / n;
  out.m4 = s4.value() / n;
  out.variance = xs.size() > 1 ? s2.value() / (n - 1.0) : 0.0;
  out.kurtosis = out.m2 > 0.0 ? out.m4 / (out.m2 * out.m2) : 0.0;
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw AnalysisError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("quantile level must lie in [0, 1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ParameterError("normal quantile needs p in (0, 1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double two_sided_normal_p(double z) noexcept {
  return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

double f_upper_tail(double x, double d1, double d2) {
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const boost::math::fisher_f_distribution<> dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double ks_statistic_sorted(std::span<const double> a,
                           std::span<const double> b) noexcept {
  if (a.empty() || b.empty()) return 0.0;
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na -
                                    static_cast<double>(j) / nb));
  }
  return best;
}

}  // namespace hte::stats
