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
#ifndef HTE_SURFACE_HPP_
#define HTE_SURFACE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hte/dataset.hpp"

namespace hte {

// Per-level arm means; the fitted values of a saturated categorical model.
struct CateRow {
  std::string level;
  std::size_t n_control = 0;
  std::size_t n_treat = 0;
  double mean_control = 0.0;
  double mean_treat = 0.0;
  double cate = 0.0;  // mean_treat - mean_control
};

struct CateTable {
  std::string breakdown;
  std::vector<CateRow> rows;  // matchable strata only, level order
  std::size_t excluded_units = 0;
};

CateTable fit_conditional_means(const ExperimentDataset& ds,
                                const StrataIndex& strata);

// Unit-weighted variance (n - 1 denominator) of the per-unit CATE over the
// units in `table`.
double explained_tev(const CateTable& table);

// Rank j in the smaller arm paired with rank k of the larger arm:
// floor(k * n_min / (n_large + 1)) + 1. All ranks are 1-based.
std::size_t rank_map(std::size_t k, std::size_t n_large, std::size_t n_min);

// Rank matching of two sorted residual vectors. Every unit receives a
// counterpart residual from the other arm and a difference that estimates
// treatment minus control. The smaller arm keeps its ranks; the larger arm
// is grouped by rank_map and each group is replaced by its average.
struct RankMatch {
  std::vector<double> control_counterpart;
  std::vector<double> control_difference;
  std::vector<double> treatment_counterpart;
  std::vector<double> treatment_difference;
};

RankMatch match_sorted_residuals(std::span<const double> control_sorted,
                                 std::span<const double> treatment_sorted);

enum class BoundMode { kStratified, kUnstratified };

std::string_view to_string(BoundMode mode) noexcept;
BoundMode parse_bound_mode(std::string_view name);

// Per-unit matching output, indexed like the dataset. Entries of excluded
// units are NaN and `stratum` is -1 for them.
struct ResidualMatch {
  BoundMode mode = BoundMode::kStratified;
  std::vector<double> residual;
  std::vector<double> counterpart;
  std::vector<double> difference;
  std::vector<std::int32_t> stratum;  // index into StrataIndex::strata
  // Matched units in canonical order: strata by level, control ranks then
  // treatment ranks. Every reduction runs in this order.
  std::vector<std::size_t> order;
  std::size_t excluded_units = 0;

  std::size_t matched_count() const noexcept { return order.size(); }
};

// Residuals against the fitted arm means, sorted within each stratum with
// ties broken by unit id, then rank-matched per stratum (stratified) or over
// the pooled residuals of all matchable strata (unstratified).
ResidualMatch match_residuals(const ExperimentDataset& ds,
                              const StrataIndex& strata, const CateTable& cates,
                              BoundMode mode = BoundMode::kStratified);

// (1 / (N - 1)) * sum of squared differences over the N matched units.
double idiosyncratic_tev_bound(const ResidualMatch& match);

struct SurfacingResult {
  std::string breakdown;
  double explained_tev = 0.0;
  double idio_tev_lower = 0.0;
  double r2_upper = 0.0;
  BoundMode mode = BoundMode::kStratified;
  std::size_t excluded_units = 0;
  std::size_t matched_units = 0;
};

// explained / (explained + idiosyncratic lower bound); 0 when the explained
// part is 0.
double r2_from_parts(double explained, double idiosyncratic) noexcept;

SurfacingResult r2_upper_bound(const ExperimentDataset& ds,
                               std::string_view breakdown,
                               BoundMode mode = BoundMode::kStratified);

// Sorted by r2_upper descending, ties by breakdown name.
std::vector<SurfacingResult> rank_breakdowns(
    const ExperimentDataset& ds, const std::vector<std::string>& breakdowns,
    BoundMode mode = BoundMode::kStratified);

// Exhaustive pairwise checks of monotonicity of `mapped` against `values`:
// globally over all pairs, or locally within each cell label.
bool is_globally_rank_preserving(std::span<const double> values,
                                 std::span<const double> mapped);
bool is_locally_rank_preserving(std::span<const double> values,
                                std::span<const double> mapped,
                                std::span<const int> cells);

}  // namespace hte

#endif  // HTE_SURFACE_HPP_
