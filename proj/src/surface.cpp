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
#include <limits>

#include <fmt/format.h>

#include "hte/error.hpp"
#include "hte/parallel.hpp"
#include "hte/stats.hpp"

namespace hte {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Ranked {
  double value;
  std::uint32_t id_rank;
  std::size_t unit;
};

bool ranked_less(const Ranked& a, const Ranked& b) noexcept {
  return a.value < b.value || (a.value == b.value && a.id_rank < b.id_rank);
}

std::vector<Ranked> sorted_outcomes(const ExperimentDataset& ds,
                                    const std::vector<std::size_t>& units) {
  std::vector<Ranked> out;
  out.reserve(units.size());
  for (std::size_t u : units) {
    out.push_back({ds.unit(u).outcome, ds.id_rank(u), u});
  }
  std::sort(out.begin(), out.end(), ranked_less);
  return out;
}

// Mean over outcomes in sorted order, so the result does not depend on the
// order units appear in the input.
double sorted_mean(const std::vector<Ranked>& xs) {
  stats::CompensatedSum acc;
  for (const auto& x : xs) acc.add(x.value);
  return acc.value() / static_cast<double>(xs.size());
}

// Replaces outcomes by residuals and re-sorts by (residual, id).
void to_residuals(std::vector<Ranked>& xs, double fitted) {
  for (auto& x : xs) x.value -= fitted;
  std::stable_sort(xs.begin(), xs.end(), ranked_less);
}

struct ArmPair {
  std::vector<Ranked> control;
  std::vector<Ranked> treatment;
};

void match_into(const ArmPair& arms, ResidualMatch& out) {
  std::vector<double> c(arms.control.size());
  std::vector<double> t(arms.treatment.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = arms.control[i].value;
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = arms.treatment[i].value;
  const RankMatch m = match_sorted_residuals(c, t);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t u = arms.control[i].unit;
    out.residual[u] = c[i];
    out.counterpart[u] = m.control_counterpart[i];
    out.difference[u] = m.control_difference[i];
    out.order.push_back(u);
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::size_t u = arms.treatment[i].unit;
    out.residual[u] = t[i];
    out.counterpart[u] = m.treatment_counterpart[i];
    out.difference[u] = m.treatment_difference[i];
    out.order.push_back(u);
  }
}

}  // namespace

CateTable fit_conditional_means(const ExperimentDataset& ds,
                                const StrataIndex& strata) {
  CateTable table;
  table.breakdown = strata.breakdown;
  for (const auto& s : strata.strata) {
    if (!s.matchable()) {
      table.excluded_units += s.size();
      continue;
    }
    CateRow row;
    row.level = s.level;
    row.n_control = s.n_control();
    row.n_treat = s.n_treat();
    row.mean_control = sorted_mean(sorted_outcomes(ds, s.control));
    row.mean_treat = sorted_mean(sorted_outcomes(ds, s.treatment));
    row.cate = row.mean_treat - row.mean_control;
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) {
    throw AnalysisError(fmt::format(
        "breakdown '{}' has no stratum with both arms present",
        strata.breakdown));
  }
  return table;
}

double explained_tev(const CateTable& table) {
  std::size_t n = 0;
  for (const auto& row : table.rows) n += row.n_control + row.n_treat;
  if (n < 2) return 0.0;
  // Centre on the first CATE so identical CATEs give exactly zero.
  const double ref = table.rows.front().cate;
  stats::CompensatedSum shift;
  for (const auto& row : table.rows) {
    shift.add(static_cast<double>(row.n_control + row.n_treat) *
              (row.cate - ref));
  }
  const double mean = ref + shift.value() / static_cast<double>(n);
  stats::CompensatedSum ss;
  for (const auto& row : table.rows) {
    const double d = row.cate - mean;
    ss.add(static_cast<double>(row.n_control + row.n_treat) * d * d);
  }
  return ss.value() / static_cast<double>(n - 1);
}

std::size_t rank_map(std::size_t k, std::size_t n_large, std::size_t n_min) {
  // Exact in integers: floor(k * n_min / (n_large + 1)) + 1.
  return static_cast<std::size_t>(
             (static_cast<__uint128_t>(k) * n_min) / (n_large + 1)) +
         1;
}

RankMatch match_sorted_residuals(std::span<const double> control_sorted,
                                 std::span<const double> treatment_sorted) {
  const std::size_t n0 = control_sorted.size();
  const std::size_t n1 = treatment_sorted.size();
  if (n0 == 0 || n1 == 0) {
    throw AnalysisError("rank matching needs both arms nonempty");
  }
  const bool control_smaller = n0 <= n1;
  const auto small = control_smaller ? control_sorted : treatment_sorted;
  const auto large = control_smaller ? treatment_sorted : control_sorted;
  const std::size_t n_min = small.size();
  const std::size_t n_large = large.size();

  // Group averages of the larger arm, one per rank of the smaller arm.
  std::vector<stats::CompensatedSum> sums(n_min);
  std::vector<std::size_t> counts(n_min, 0);
  for (std::size_t k = 1; k <= n_large; ++k) {
    const std::size_t j = rank_map(k, n_large, n_min);
    sums[j - 1].add(large[k - 1]);
    ++counts[j - 1];
  }
  std::vector<double> averaged(n_min);
  for (std::size_t j = 0; j < n_min; ++j) {
    averaged[j] = sums[j].value() / static_cast<double>(counts[j]);
  }

  std::vector<double> small_counterpart = averaged;
  std::vector<double> large_counterpart(n_large);
  for (std::size_t k = 1; k <= n_large; ++k) {
    large_counterpart[k - 1] = small[rank_map(k, n_large, n_min) - 1];
  }

  RankMatch out;
  auto& c_cp = out.control_counterpart;
  auto& t_cp = out.treatment_counterpart;
  if (control_smaller) {
    c_cp = std::move(small_counterpart);
    t_cp = std::move(large_counterpart);
  } else {
    c_cp = std::move(large_counterpart);
    t_cp = std::move(small_counterpart);
  }
  out.control_difference.resize(n0);
  out.treatment_difference.resize(n1);
  for (std::size_t i = 0; i < n0; ++i) {
    out.control_difference[i] = c_cp[i] - control_sorted[i];
  }
  for (std::size_t i = 0; i < n1; ++i) {
    out.treatment_difference[i] = treatment_sorted[i] - t_cp[i];
  }
  return out;
}

std::string_view to_string(BoundMode mode) noexcept {
  return mode == BoundMode::kStratified ? "stratified" : "unstratified";
}

BoundMode parse_bound_mode(std::string_view name) {
  if (name == "stratified") return BoundMode::kStratified;
  if (name == "unstratified") return BoundMode::kUnstratified;
  throw ParameterError(fmt::format("unknown bound mode '{}'", name));
}

ResidualMatch match_residuals(const ExperimentDataset& ds,
                              const StrataIndex& strata, const CateTable& cates,
                              BoundMode mode) {
  if (cates.breakdown != strata.breakdown) {
    throw AnalysisError("CATE table and strata index use different breakdowns");
  }
  const std::size_t n = ds.n_total();
  ResidualMatch out;
  out.mode = mode;
  out.residual.assign(n, kNaN);
  out.counterpart.assign(n, kNaN);
  out.difference.assign(n, kNaN);
  out.stratum.assign(n, -1);

  ArmPair pooled;
  std::size_t row = 0;
  for (std::size_t si = 0; si < strata.strata.size(); ++si) {
    const auto& s = strata.strata[si];
    if (!s.matchable()) {
      out.excluded_units += s.size();
      continue;
    }
    if (row >= cates.rows.size() || cates.rows[row].level != s.level) {
      throw AnalysisError("CATE table was not fitted on these strata");
    }
    const auto& fit = cates.rows[row++];
    for (std::size_t u : s.control) out.stratum[u] = static_cast<std::int32_t>(si);
    for (std::size_t u : s.treatment) {
      out.stratum[u] = static_cast<std::int32_t>(si);
    }
    ArmPair arms{sorted_outcomes(ds, s.control), sorted_outcomes(ds, s.treatment)};
    to_residuals(arms.control, fit.mean_control);
    to_residuals(arms.treatment, fit.mean_treat);
    if (mode == BoundMode::kStratified) {
      match_into(arms, out);
    } else {
      pooled.control.insert(pooled.control.end(), arms.control.begin(),
                            arms.control.end());
      pooled.treatment.insert(pooled.treatment.end(), arms.treatment.begin(),
                              arms.treatment.end());
    }
  }
  if (row != cates.rows.size()) {
    throw AnalysisError("CATE table was not fitted on these strata");
  }
  if (mode == BoundMode::kUnstratified) {
    std::sort(pooled.control.begin(), pooled.control.end(), ranked_less);
    std::sort(pooled.treatment.begin(), pooled.treatment.end(), ranked_less);
    match_into(pooled, out);
  }
  return out;
}

double idiosyncratic_tev_bound(const ResidualMatch& match) {
  if (match.order.size() < 2) {
    throw AnalysisError("idiosyncratic bound needs at least 2 matched units");
  }
  stats::CompensatedSum acc;
  for (std::size_t u : match.order) {
    const double d = match.difference[u];
    acc.add(d * d);
  }
  return acc.value() / static_cast<double>(match.order.size() - 1);
}

double r2_from_parts(double explained, double idiosyncratic) noexcept {
  if (explained <= 0.0) return 0.0;
  return explained / (explained + idiosyncratic);
}

SurfacingResult r2_upper_bound(const ExperimentDataset& ds,
                               std::string_view breakdown, BoundMode mode) {
  const StrataIndex strata = build_strata(ds, breakdown);
  const CateTable cates = fit_conditional_means(ds, strata);
  const ResidualMatch match = match_residuals(ds, strata, cates, mode);
  SurfacingResult r;
  r.breakdown = std::string(breakdown);
  r.mode = mode;
  r.explained_tev = explained_tev(cates);
  r.idio_tev_lower = idiosyncratic_tev_bound(match);
  r.r2_upper = r2_from_parts(r.explained_tev, r.idio_tev_lower);
  r.excluded_units = match.excluded_units;
  r.matched_units = match.matched_count();
  return r;
}

std::vector<SurfacingResult> rank_breakdowns(
    const ExperimentDataset& ds, const std::vector<std::string>& breakdowns,
    BoundMode mode) {
  if (breakdowns.empty()) throw ParameterError("no breakdowns given");
  for (const auto& b : breakdowns) ds.covariate_index(b);
  std::vector<SurfacingResult> results(breakdowns.size());
  parallel_for(breakdowns.size(), [&](std::size_t i) {
    results[i] = r2_upper_bound(ds, breakdowns[i], mode);
  });
  std::stable_sort(results.begin(), results.end(),
                   [](const SurfacingResult& a, const SurfacingResult& b) {
                     if (a.r2_upper != b.r2_upper) return a.r2_upper > b.r2_upper;
                     return a.breakdown < b.breakdown;
                   });
  return results;
}

bool is_globally_rank_preserving(std::span<const double> values,
                                 std::span<const double> mapped) {
  if (values.size() != mapped.size()) {
    throw ParameterError("values and mapped values differ in length");
  }
  for (std::size_t a = 0; a < values.size(); ++a) {
    for (std::size_t b = 0; b < values.size(); ++b) {
      if (values[a] >= values[b] && !(mapped[a] >= mapped[b])) return false;
    }
  }
  return true;
}

bool is_locally_rank_preserving(std::span<const double> values,
                                std::span<const double> mapped,
                                std::span<const int> cells) {
  if (values.size() != mapped.size() || values.size() != cells.size()) {
    throw ParameterError("values, mapped values and cells differ in length");
  }
  for (std::size_t a = 0; a < values.size(); ++a) {
    for (std::size_t b = 0; b < values.size(); ++b) {
      if (cells[a] == cells[b] && values[a] >= values[b] &&
          !(mapped[a] >= mapped[b])) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace hte
