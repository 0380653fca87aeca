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
#ifndef HTE_ITE_HPP_
#define HTE_ITE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hte/dataset.hpp"

namespace hte {

struct IteOptions {
  // Defaults to 0.05, 0.10, ..., 0.95.
  std::vector<double> quantile_levels = default_quantile_levels();
  std::size_t max_bins = 512;

  static std::vector<double> default_quantile_levels();
};

// Conditional ITE distribution of one stratum. Histogram counts use the
// profile's shared bin edges.
struct StratumIte {
  std::string level;
  std::size_t n = 0;     // matched units
  double weight = 0.0;   // n / total matched
  double cate = 0.0;
  double mean_difference = 0.0;
  std::vector<double> quantiles;  // at IteProfile::quantile_levels
  std::vector<std::uint64_t> counts;

  // Normalised histogram: counts / n.
  std::vector<double> density() const;
};

struct IteProfile {
  std::string breakdown;
  std::vector<double> tau_hat;     // per dataset unit; NaN when excluded
  std::vector<double> difference;  // the matched residual difference
  std::vector<std::int32_t> stratum;
  std::vector<double> quantile_levels;
  std::vector<double> bin_edges;  // bins are [e_i, e_{i+1}), last one closed
  std::vector<StratumIte> strata;  // matchable strata in level order
  std::vector<std::uint64_t> pooled_counts;
  std::size_t matched_units = 0;
  std::size_t excluded_units = 0;

  std::size_t bin_count() const noexcept {
    return bin_edges.empty() ? 0 : bin_edges.size() - 1;
  }
  // pooled_counts / matched_units.
  std::vector<double> pooled_density() const;
};

// tau_hat = stratum CATE + the unit's stratified rank-matching difference.
IteProfile estimate_ites(const ExperimentDataset& ds, std::string_view breakdown,
                         const IteOptions& options = {});

// Freedman-Diaconis edges over sorted data, capped at `max_bins`. Falls back
// to Sturges' rule when the IQR is zero and to a single bin when all values
// coincide.
std::vector<double> freedman_diaconis_edges(const std::vector<double>& sorted,
                                            std::size_t max_bins);
// Index of the bin holding x; values outside the edges are clamped.
std::size_t bin_index(const std::vector<double>& edges, double x);

struct MixtureGroup {
  std::string label;  // levels joined by '+'
  std::vector<std::string> levels;
  std::size_t n = 0;
  double weight = 0.0;
  std::vector<std::uint64_t> counts;
  // counts / total matched: this group's contribution to the pooled curve.
  std::vector<double> weighted_density;
};

struct MixtureTable {
  std::vector<double> bin_edges;
  std::vector<MixtureGroup> groups;
  std::vector<std::uint64_t> pooled_counts;
  std::vector<double> pooled_density;
  std::size_t total = 0;
};

// Groups strata for plotting. Each inner vector of `merge` becomes one group;
// strata not named stay on their own. Groups must be disjoint and name known
// levels.
MixtureTable mixture_decomposition(
    const IteProfile& profile,
    const std::vector<std::vector<std::string>>& merge = {});

}  // namespace hte

#endif  // HTE_ITE_HPP_
