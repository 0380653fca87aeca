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
#include "hte/ite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "hte/error.hpp"
#include "hte/stats.hpp"
#include "hte/surface.hpp"

namespace hte {

std::vector<double> IteOptions::default_quantile_levels() {
  std::vector<double> levels;
  for (int p = 5; p <= 95; p += 5) levels.push_back(p / 100.0);
  return levels;
}

std::vector<double> StratumIte::density() const {
  std::vector<double> out(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
  }
  return out;
}

std::vector<double> IteProfile::pooled_density() const {
  std::vector<double> out(pooled_counts.size());
  for (std::size_t b = 0; b < pooled_counts.size(); ++b) {
    out[b] = static_cast<double>(pooled_counts[b]) /
             static_cast<double>(matched_units);
  }
  return out;
}

std::vector<double> freedman_diaconis_edges(const std::vector<double>& sorted,
                                            std::size_t max_bins) {
  if (sorted.empty()) throw AnalysisError("histogram of an empty sample");
  if (max_bins < 1) throw ParameterError("max_bins must be at least 1");
  const double lo = sorted.front();
  const double hi = sorted.back();
  std::size_t bins = 1;
  if (hi > lo) {
    const double iqr = stats::quantile_sorted(sorted, 0.75) -
                       stats::quantile_sorted(sorted, 0.25);
    const auto n = static_cast<double>(sorted.size());
    if (iqr > 0.0) {
      const double width = 2.0 * iqr / std::cbrt(n);
      const double raw = std::ceil((hi - lo) / width);
      bins = raw >= static_cast<double>(max_bins)
                 ? max_bins
                 : std::max<std::size_t>(1, static_cast<std::size_t>(raw));
    } else {
      bins = std::min(max_bins,
                      static_cast<std::size_t>(std::ceil(std::log2(n))) + 1);
    }
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

std::size_t bin_index(const std::vector<double>& edges, double x) {
  const std::size_t bins = edges.size() - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  if (it == edges.begin()) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(it - edges.begin()) - 1);
}

IteProfile estimate_ites(const ExperimentDataset& ds, std::string_view breakdown,
                         const IteOptions& options) {
  for (double p : options.quantile_levels) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ParameterError(fmt::format("quantile level {} outside [0, 1]", p));
    }
  }
  const StrataIndex strata = build_strata(ds, breakdown);
  const CateTable cates = fit_conditional_means(ds, strata);
  const ResidualMatch match =
      match_residuals(ds, strata, cates, BoundMode::kStratified);

  IteProfile profile;
  profile.breakdown = std::string(breakdown);
  profile.quantile_levels = options.quantile_levels;
  profile.stratum = match.stratum;
  profile.difference = match.difference;
  profile.tau_hat.assign(ds.n_total(), std::numeric_limits<double>::quiet_NaN());
  profile.matched_units = match.matched_count();
  profile.excluded_units = match.excluded_units;

  std::map<std::int32_t, const CateRow*> row_of;
  {
    std::size_t row = 0;
    for (std::size_t si = 0; si < strata.strata.size(); ++si) {
      if (strata.strata[si].matchable()) {
        row_of[static_cast<std::int32_t>(si)] = &cates.rows[row++];
      }
    }
  }

  std::vector<double> pooled;
  pooled.reserve(match.matched_count());
  for (std::size_t u : match.order) {
    const double tau = row_of.at(match.stratum[u])->cate + match.difference[u];
    profile.tau_hat[u] = tau;
    pooled.push_back(tau);
  }
  std::sort(pooled.begin(), pooled.end());
  profile.bin_edges = freedman_diaconis_edges(pooled, options.max_bins);
  const std::size_t bins = profile.bin_count();
  profile.pooled_counts.assign(bins, 0);

  for (const auto& [si, row] : row_of) {
    const auto& s = strata.strata[static_cast<std::size_t>(si)];
    StratumIte out;
    out.level = row->level;
    out.cate = row->cate;
    out.counts.assign(bins, 0);
    std::vector<double> taus;
    stats::CompensatedSum diff_sum;
    for (const auto* arm : {&s.control, &s.treatment}) {
      for (std::size_t u : *arm) {
        taus.push_back(profile.tau_hat[u]);
        diff_sum.add(match.difference[u]);
      }
    }
    std::sort(taus.begin(), taus.end());
    out.n = taus.size();
    out.weight = static_cast<double>(out.n) /
                 static_cast<double>(profile.matched_units);
    out.mean_difference = diff_sum.value() / static_cast<double>(out.n);
    for (double p : options.quantile_levels) {
      out.quantiles.push_back(stats::quantile_sorted(taus, p));
    }
    for (double tau : taus) {
      const std::size_t b = bin_index(profile.bin_edges, tau);
      ++out.counts[b];
      ++profile.pooled_counts[b];
    }
    profile.strata.push_back(std::move(out));
  }
  return profile;
}

MixtureTable mixture_decomposition(
    const IteProfile& profile,
    const std::vector<std::vector<std::string>>& merge) {
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < profile.strata.size(); ++i) {
    index_of[profile.strata[i].level] = i;
  }
  // Group id per stratum; unmerged strata get their own group.
  std::vector<long> group_of(profile.strata.size(), -1);
  std::set<std::string> seen;
  for (std::size_t g = 0; g < merge.size(); ++g) {
    if (merge[g].empty()) throw ValidationError("empty merge group");
    for (const auto& level : merge[g]) {
      if (!index_of.count(level)) {
        throw ValidationError(fmt::format(
            "merge group names level '{}' which is not a matched stratum",
            level));
      }
      if (!seen.insert(level).second) {
        throw ValidationError(
            fmt::format("level '{}' appears in more than one merge group", level));
      }
      group_of[index_of[level]] = static_cast<long>(g);
    }
  }

  MixtureTable table;
  table.bin_edges = profile.bin_edges;
  table.pooled_counts = profile.pooled_counts;
  table.pooled_density = profile.pooled_density();
  table.total = profile.matched_units;
  const std::size_t bins = profile.bin_count();

  std::map<long, std::size_t> slot_of_merge;
  for (std::size_t i = 0; i < profile.strata.size(); ++i) {
    const auto& s = profile.strata[i];
    std::size_t slot;
    if (group_of[i] < 0) {
      slot = table.groups.size();
      table.groups.emplace_back();
    } else if (auto it = slot_of_merge.find(group_of[i]);
               it != slot_of_merge.end()) {
      slot = it->second;
    } else {
      slot = table.groups.size();
      slot_of_merge[group_of[i]] = slot;
      table.groups.emplace_back();
    }
    auto& g = table.groups[slot];
    if (g.counts.empty()) g.counts.assign(bins, 0);
    g.levels.push_back(s.level);
    g.n += s.n;
    for (std::size_t b = 0; b < bins; ++b) g.counts[b] += s.counts[b];
  }
  for (auto& g : table.groups) {
    for (std::size_t i = 0; i < g.levels.size(); ++i) {
      if (i > 0) g.label += '+';
      g.label += g.levels[i];
    }
    g.weight = static_cast<double>(g.n) / static_cast<double>(table.total);
    g.weighted_density.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      g.weighted_density[b] =
          static_cast<double>(g.counts[b]) / static_cast<double>(table.total);
    }
  }
  return table;
}

}  // namespace hte
