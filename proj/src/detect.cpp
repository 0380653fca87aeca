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
#include "hte/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <utility>

#include <fmt/format.h>

#include "hte/error.hpp"
#include "hte/parallel.hpp"
#include "hte/random.hpp"
#include "hte/stats.hpp"

namespace hte {
namespace {

std::vector<double> sorted_copy(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Fills the moment diagnostics shared by all methods.
DetectionResult describe(DetectionMethod method,
                         const std::vector<double>& treatment,
                         const std::vector<double>& control) {
  const auto mt = stats::moments(treatment);
  const auto mc = stats::moments(control);
  DetectionResult r;
  r.method = method;
  r.var_treat = mt.variance;
  r.var_control = mc.variance;
  r.kurt_treat = mt.kurtosis;
  r.kurt_control = mc.kurtosis;
  r.n_treat = treatment.size();
  r.n_control = control.size();
  return r;
}

void validate_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw ValidationError("non-finite outcome");
  }
}

// Largest |i*n0 - k*n1| over tie-group ends, where i and k count treatment
// and control labels seen so far along the sorted pooled sample. Equals the
// KS distance times n1*n0, kept integral so comparisons are exact.
template <typename Label>
std::int64_t ks_scaled(std::span<const Label> labels,
                       std::span<const std::uint32_t> group_ends,
                       std::int64_t n1, std::int64_t n0) {
  std::int64_t treated = 0;
  std::int64_t controls = 0;
  std::int64_t best = 0;
  std::size_t pos = 0;
  for (const std::uint32_t end : group_ends) {
    for (; pos < end; ++pos) {
      if (labels[pos]) {
        ++treated;
      } else {
        ++controls;
      }
    }
    const std::int64_t gap = treated * n0 - controls * n1;
    best = std::max(best, gap < 0 ? -gap : gap);
  }
  return best;
}

}  // namespace

std::string_view to_string(DetectionMethod method) noexcept {
  switch (method) {
    case DetectionMethod::kKurtosis:
      return "kurtosis";
    case DetectionMethod::kBootstrapF:
      return "bootstrap_f";
    case DetectionMethod::kFrtKs:
      return "frt_ks";
  }
  return "unknown";
}

DetectionMethod parse_detection_method(std::string_view name) {
  if (name == "kurtosis") return DetectionMethod::kKurtosis;
  if (name == "bootstrap_f" || name == "bootstrap-f") {
    return DetectionMethod::kBootstrapF;
  }
  if (name == "frt_ks" || name == "frt") return DetectionMethod::kFrtKs;
  throw ParameterError(fmt::format("unknown detection method '{}'", name));
}

DetectionResult kurtosis_logvar_test(std::span<const double> treatment,
                                     std::span<const double> control) {
  if (treatment.size() < 4 || control.size() < 4) {
    throw InsufficientDataError(fmt::format(
        "kurtosis test needs at least 4 units per arm (treatment {}, "
        "control {})",
        treatment.size(), control.size()));
  }
  validate_finite(treatment);
  validate_finite(control);
  // Sorted input makes the moments a function of the multiset only.
  const auto t = sorted_copy(treatment);
  const auto c = sorted_copy(control);
  DetectionResult r = describe(DetectionMethod::kKurtosis, t, c);
  if (!(r.var_treat > 0.0) || !(r.var_control > 0.0)) {
    throw DegenerateSampleError("zero outcome variance in an arm");
  }
  const double se =
      std::sqrt((r.kurt_treat - 1.0) / static_cast<double>(r.n_treat) +
                (r.kurt_control - 1.0) / static_cast<double>(r.n_control));
  const double diff = std::log(r.var_treat) - std::log(r.var_control);
  r.statistic = diff == 0.0 ? 0.0 : diff / se;
  r.p_value = stats::two_sided_normal_p(r.statistic);
  return r;
}

DetectionResult kurtosis_logvar_test(const ExperimentDataset& ds) {
  return kurtosis_logvar_test(ds.outcomes(Arm::kTreatment),
                              ds.outcomes(Arm::kControl));
}

DetectionResult bootstrap_f_test(std::span<const double> treatment,
                                 std::span<const double> control,
                                 const BootstrapOptions& options) {
  if (options.bootstraps < 2) {
    throw ParameterError("bootstrap count must be at least 2");
  }
  if (treatment.empty() || control.empty()) {
    throw InsufficientDataError("bootstrap F-test needs both arms nonempty");
  }
  validate_finite(treatment);
  validate_finite(control);
  const auto t = sorted_copy(treatment);
  const auto c = sorted_copy(control);
  DetectionResult r = describe(DetectionMethod::kBootstrapF, t, c);

  const std::size_t b = options.bootstraps;
  std::vector<double> means(2 * b);
  // Task k < b resamples treatment, k >= b control; the substream id is the
  // task index so results do not depend on scheduling.
  parallel_for(2 * b, [&](std::size_t k) {
    const auto& arm = k < b ? t : c;
    RandomStream rng(options.seed, k);
    stats::CompensatedSum acc;
    for (std::size_t i = 0; i < arm.size(); ++i) {
      acc.add(arm[rng.below(arm.size())]);
    }
    means[k] = acc.value() / static_cast<double>(arm.size());
  });
  const double vt = stats::variance(std::span(means).first(b));
  const double vc = stats::variance(std::span(means).subspan(b));
  const double hi = std::max(vt, vc);
  const double lo = std::min(vt, vc);
  const double df = static_cast<double>(b - 1);
  if (hi == 0.0) {
    r.statistic = 1.0;
    r.p_value = 1.0;
  } else if (lo == 0.0) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.statistic = hi / lo;
    r.p_value = std::min(1.0, 2.0 * stats::f_upper_tail(r.statistic, df, df));
  }
  return r;
}

DetectionResult bootstrap_f_test(const ExperimentDataset& ds,
                                 const BootstrapOptions& options) {
  return bootstrap_f_test(ds.outcomes(Arm::kTreatment),
                          ds.outcomes(Arm::kControl), options);
}

DetectionResult frt_ks_test(std::span<const double> treatment,
                            std::span<const double> control,
                            const FrtOptions& options) {
  if (options.permutations < 100) {
    throw ParameterError("FRT needs at least 100 permutations");
  }
  if (options.grid_size < 1) {
    throw ParameterError("FRT grid needs at least one point");
  }
  if (treatment.size() < 2 || control.size() < 2) {
    throw InsufficientDataError("FRT needs at least 2 units per arm");
  }
  validate_finite(treatment);
  validate_finite(control);
  const auto t = sorted_copy(treatment);
  const auto c = sorted_copy(control);
  DetectionResult r = describe(DetectionMethod::kFrtKs, t, c);

  const auto n1 = static_cast<std::int64_t>(t.size());
  const auto n0 = static_cast<std::int64_t>(c.size());
  const std::size_t n = t.size() + c.size();

  const double ate = stats::mean(t) - stats::mean(c);
  const double se = std::sqrt(r.var_treat / static_cast<double>(n1) +
                              r.var_control / static_cast<double>(n0));
  const double half_width = stats::normal_quantile(0.9995) * se;
  const std::size_t g = options.grid_size;
  r.grid_shifts.resize(g);
  for (std::size_t i = 0; i < g; ++i) {
    r.grid_shifts[i] =
        g == 1 ? ate
               : ate - half_width +
                     2.0 * half_width * static_cast<double>(i) /
                         static_cast<double>(g - 1);
  }

  // Permutation j assigns n1 treatment labels to the sorted pooled positions
  // uniformly at random, drawn from substream j. The same label draws serve
  // every grid point.
  const std::size_t perms = options.permutations;
  std::vector<std::uint8_t> labels(perms * n);
  parallel_for(perms, [&](std::size_t j) {
    std::span<std::uint8_t> row(labels.data() + j * n, n);
    std::fill(row.begin(), row.begin() + n1, std::uint8_t{1});
    std::fill(row.begin() + n1, row.end(), std::uint8_t{0});
    RandomStream rng(options.seed, j);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(row[i], row[rng.below(i + 1)]);
    }
  });

  // Without ties the null distribution is the same at every grid point.
  std::optional<std::vector<std::int64_t>> untied_null;
  std::vector<std::uint32_t> all_ends(n);
  std::iota(all_ends.begin(), all_ends.end(), 1u);

  struct Point {
    double value;
    std::uint32_t index;  // treatment first, then control
  };
  std::vector<Point> pooled(n);
  std::vector<std::uint8_t> observed(n);
  std::vector<std::uint32_t> ends;
  std::vector<std::int64_t> tied_null(perms);

  r.grid_p_values.resize(g);
  std::size_t best = 0;
  std::vector<std::int64_t> observed_stat(g);
  for (std::size_t gi = 0; gi < g; ++gi) {
    const double shift = r.grid_shifts[gi];
    for (std::size_t i = 0; i < t.size(); ++i) {
      pooled[i] = {t[i] - shift, static_cast<std::uint32_t>(i)};
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      pooled[t.size() + i] = {c[i], static_cast<std::uint32_t>(t.size() + i)};
    }
    std::sort(pooled.begin(), pooled.end(), [](const Point& a, const Point& b) {
      return a.value < b.value || (a.value == b.value && a.index < b.index);
    });
    ends.clear();
    for (std::size_t i = 0; i < n; ++i) {
      observed[i] = pooled[i].index < t.size() ? 1 : 0;
      if (i + 1 == n || pooled[i + 1].value != pooled[i].value) {
        ends.push_back(static_cast<std::uint32_t>(i + 1));
      }
    }
    const std::int64_t obs = ks_scaled<std::uint8_t>(observed, ends, n1, n0);
    observed_stat[gi] = obs;

    const std::vector<std::int64_t>* null = nullptr;
    if (ends.size() == n) {
      if (!untied_null) {
        untied_null.emplace(perms);
        parallel_for(perms, [&](std::size_t j) {
          (*untied_null)[j] = ks_scaled<std::uint8_t>(
              std::span<const std::uint8_t>(labels.data() + j * n, n),
              all_ends, n1, n0);
        });
      }
      null = &*untied_null;
    } else {
      parallel_for(perms, [&](std::size_t j) {
        tied_null[j] = ks_scaled<std::uint8_t>(
            std::span<const std::uint8_t>(labels.data() + j * n, n), ends, n1,
            n0);
      });
      null = &tied_null;
    }
    const auto exceed = static_cast<double>(
        std::count_if(null->begin(), null->end(),
                      [obs](std::int64_t s) { return s >= obs; }));
    r.grid_p_values[gi] = (1.0 + exceed) / (static_cast<double>(perms) + 1.0);
    if (r.grid_p_values[gi] > r.grid_p_values[best]) best = gi;
  }
  r.p_value = r.grid_p_values[best];
  r.statistic = static_cast<double>(observed_stat[best]) /
                (static_cast<double>(n1) * static_cast<double>(n0));
  return r;
}

DetectionResult frt_ks_test(const ExperimentDataset& ds,
                            const FrtOptions& options) {
  return frt_ks_test(ds.outcomes(Arm::kTreatment), ds.outcomes(Arm::kControl),
                     options);
}

namespace {

// Validates and returns the sorted p-values together with the number of
// step-up rejections.
std::pair<std::vector<double>, std::size_t> bh_step_up(
    std::span<const double> pvalues, double alpha) {
  if (pvalues.empty()) throw ValidationError("no p-values given");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError(fmt::format("p-value {} outside [0, 1]", p));
    }
  }
  std::vector<double> sorted(pvalues.begin(), pvalues.end());
  std::sort(sorted.begin(), sorted.end());
  const auto m = static_cast<double>(sorted.size());
  for (std::size_t i = sorted.size(); i >= 1; --i) {
    if (sorted[i - 1] <= static_cast<double>(i) * alpha / m) {
      return {std::move(sorted), i};
    }
  }
  return {std::move(sorted), 0};
}

}  // namespace

double bh_threshold(std::span<const double> pvalues, double alpha) {
  const auto [sorted, k] = bh_step_up(pvalues, alpha);
  return k == 0 ? 0.0 : sorted[k - 1];
}

FdrReport bh_adjust(std::vector<LabeledPValue> pvalues, double alpha) {
  std::vector<double> ps;
  ps.reserve(pvalues.size());
  for (const auto& lp : pvalues) ps.push_back(lp.p_value);
  const auto [sorted, k] = bh_step_up(ps, alpha);
  FdrReport report;
  report.alpha = alpha;
  if (k > 0) {
    report.threshold = sorted[k - 1];
    for (const auto& lp : pvalues) {
      if (lp.p_value <= report.threshold) report.rejected.push_back(lp.label);
    }
  }
  report.inputs = std::move(pvalues);
  return report;
}

}  // namespace hte
