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

#include <fmt/format.h>

#include "hte/error.hpp"
#include "hte/parallel.hpp"
#include "hte/random.hpp"
#include "hte/stats.hpp"
#include "hte/surface.hpp"

namespace hte {
namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagDetectionData = 1;
constexpr std::uint64_t kTagBootstrap = 2;
constexpr std::uint64_t kTagFrt = 3;
constexpr std::uint64_t kTagR2Data = 4;

void require(bool ok, std::string_view field, std::string_view what) {
  if (!ok) throw ParameterError(fmt::format("{}: {}", field, what));
}

}  // namespace

std::vector<std::uint64_t> sample_negbin(double mean, double dispersion,
                                         std::size_t n, std::uint64_t seed) {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw ParameterError("negative binomial mean must be positive");
  }
  if (!(dispersion > 0.0) || !std::isfinite(dispersion)) {
    throw ParameterError("negative binomial dispersion must be positive");
  }
  RandomStream rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& x : out) x = rng.negative_binomial(mean, dispersion);
  return out;
}

NegativeBinomialQuantile::NegativeBinomialQuantile(double mean,
                                                   double dispersion)
    : mean_(mean), dispersion_(dispersion) {
  if (!(mean > 0.0) || !(dispersion > 0.0)) {
    throw ParameterError("negative binomial parameters must be positive");
  }
  const double size = 1.0 / dispersion;
  const double p = size / (size + mean);
  double pmf = std::exp(size * std::log(p));
  double cdf = pmf;
  cdf_.push_back(cdf);
  constexpr double kUpper = 1.0 - 1e-12;
  constexpr std::size_t kMaxTable = 50'000'000;
  for (std::size_t k = 0; cdf < kUpper && cdf_.size() < kMaxTable; ++k) {
    pmf *= (static_cast<double>(k) + size) / (static_cast<double>(k) + 1.0) *
           (1.0 - p);
    cdf += pmf;
    cdf_.push_back(cdf);
  }
}

std::uint64_t NegativeBinomialQuantile::operator()(double u) const noexcept {
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return cdf_.size() - 1;
  return static_cast<std::uint64_t>(it - cdf_.begin());
}

double NegativeBinomialQuantile::variance() const noexcept {
  return mean_ + dispersion_ * mean_ * mean_;
}

std::string_view to_string(ScenarioKind kind) noexcept {
  return kind == ScenarioKind::kDetectionPower ? "detection_power" : "r2_bound";
}

void SimScenario::validate() const {
  require(replications >= 1, "replications", "must be at least 1");
  require(alpha > 0.0 && alpha < 1.0, "alpha", "must lie in (0, 1)");
  if (kind == ScenarioKind::kDetectionPower) {
    const auto& d = detection;
    require(d.n_units >= 8, "n_units", "must be at least 8");
    require(d.nb_mean > 0.0, "nb_mean", "must be positive");
    require(d.nb_dispersion > 0.0, "nb_dispersion", "must be positive");
    require(std::isfinite(d.lognormal_log_mean), "lognormal_log_mean",
            "must be finite");
    require(!d.sigma_grid.empty(), "sigma_grid", "must be nonempty");
    for (double s : d.sigma_grid) {
      require(s >= 0.0 && std::isfinite(s), "sigma_grid",
              "entries must be finite and >= 0");
    }
    require(d.bootstraps >= 2, "bootstraps", "must be at least 2");
    require(d.frt_permutations >= 100, "frt_permutations",
            "must be at least 100");
    require(d.frt_grid >= 1, "frt_grid", "must be at least 1");
    require(!d.methods.empty(), "methods", "must be nonempty");
  } else {
    const auto& r = r2;
    const std::size_t m = r.levels.size();
    require(m >= 1, "levels", "must be nonempty");
    require(r.stratum_sizes.size() == m, "stratum_sizes",
            "needs one entry per level");
    require(r.control_means.size() == m, "control_means",
            "needs one entry per level");
    require(r.effect_means.size() == m, "effect_means",
            "needs one entry per level");
    require(r.epsilon_means.size() == m, "epsilon_means",
            "needs one entry per level");
    for (std::size_t s : r.stratum_sizes) {
      require(s >= 4, "stratum_sizes", "entries must be at least 4");
    }
    for (double mu : r.epsilon_means) {
      require(mu > 0.0, "epsilon_means", "entries must be positive");
    }
    require(r.epsilon_dispersion > 0.0, "epsilon_dispersion", "must be positive");
    require(r.error_mean > 0.0, "error_mean", "must be positive");
    require(r.error_dispersion > 0.0, "error_dispersion", "must be positive");
    require(!r.correlations.empty(), "correlations", "must be nonempty");
    for (double c : r.correlations) {
      require(c >= 0.0 && c <= 1.0, "correlations", "entries must lie in [0, 1]");
    }
    require(r.treat_fraction > 0.0 && r.treat_fraction < 1.0, "treat_fraction",
            "must lie in (0, 1)");
  }
}

ArmSamples generate_detection_data(const DetectionPowerParams& params,
                                   double sigma, std::uint64_t seed) {
  RandomStream rng(seed);
  const std::size_t n_control = params.n_units / 2;
  ArmSamples out;
  out.control.reserve(n_control);
  out.treatment.reserve(params.n_units - n_control);
  // Every unit consumes the same draws whatever sigma is, so a replication
  // uses common random numbers across the sigma grid.
  for (std::size_t i = 0; i < params.n_units; ++i) {
    const auto aa = static_cast<double>(
        rng.negative_binomial(params.nb_mean, params.nb_dispersion));
    const double noise = rng.normal();
    const double z = rng.normal();
    const double base = (params.pre_period_adjust ? 0.0 : aa) + noise;
    if (i < n_control) {
      out.control.push_back(base);
    } else {
      out.treatment.push_back(base +
                              std::exp(params.lognormal_log_mean + sigma * z));
    }
  }
  return out;
}

const PowerCell& PowerTable::at(DetectionMethod method,
                                std::size_t sigma_index) const {
  std::size_t seen = 0;
  for (const auto& cell : cells) {
    if (cell.method != method) continue;
    if (seen++ == sigma_index) return cell;
  }
  throw LookupError("no such power cell");
}

PowerTable run_detection_power_study(const SimScenario& scenario) {
  if (scenario.kind != ScenarioKind::kDetectionPower) {
    throw ParameterError("kind: scenario is not a detection_power scenario");
  }
  scenario.validate();
  const auto& params = scenario.detection;
  const std::size_t reps = scenario.replications;
  const std::size_t n_sigma = params.sigma_grid.size();
  const std::size_t n_methods = params.methods.size();

  // p[(method * n_sigma + sigma) * reps + rep]
  std::vector<double> p(n_methods * n_sigma * reps);
  parallel_for(reps, [&](std::size_t rep) {
    const std::uint64_t data_seed =
        derive_seed(scenario.seed, kTagDetectionData, rep);
    for (std::size_t s = 0; s < n_sigma; ++s) {
      const ArmSamples data =
          generate_detection_data(params, params.sigma_grid[s], data_seed);
      const std::uint64_t cell = rep * n_sigma + s;
      for (std::size_t m = 0; m < n_methods; ++m) {
        double pv = 1.0;
        switch (params.methods[m]) {
          case DetectionMethod::kKurtosis:
            pv = kurtosis_logvar_test(data.treatment, data.control).p_value;
            break;
          case DetectionMethod::kBootstrapF:
            pv = bootstrap_f_test(data.treatment, data.control,
                                  {params.bootstraps,
                                   derive_seed(scenario.seed, kTagBootstrap, cell)})
                     .p_value;
            break;
          case DetectionMethod::kFrtKs:
            pv = frt_ks_test(data.treatment, data.control,
                             {params.frt_permutations, params.frt_grid,
                              derive_seed(scenario.seed, kTagFrt, cell)})
                     .p_value;
            break;
        }
        p[(m * n_sigma + s) * reps + rep] = pv;
      }
    }
  });

  PowerTable table;
  table.alpha = scenario.alpha;
  table.bh_applied = params.apply_bh;
  table.replications = reps;
  for (std::size_t m = 0; m < n_methods; ++m) {
    for (std::size_t s = 0; s < n_sigma; ++s) {
      PowerCell cell;
      cell.method = params.methods[m];
      cell.sigma = params.sigma_grid[s];
      const auto first = p.begin() + static_cast<std::ptrdiff_t>((m * n_sigma + s) * reps);
      cell.p_values.assign(first, first + static_cast<std::ptrdiff_t>(reps));
      const double cut = params.apply_bh
                             ? bh_threshold(cell.p_values, scenario.alpha)
                             : scenario.alpha;
      const auto hits = std::count_if(cell.p_values.begin(), cell.p_values.end(),
                                      [cut](double pv) { return pv <= cut; });
      cell.rejection_rate =
          static_cast<double>(hits) / static_cast<double>(reps);
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

double true_r2(const std::vector<double>& tau,
               const std::vector<std::size_t>& stratum_sizes) {
  std::vector<double> fitted(tau.size());
  std::size_t offset = 0;
  for (std::size_t size : stratum_sizes) {
    const std::span<const double> block(tau.data() + offset, size);
    const double mean = stats::mean(block);
    std::fill_n(fitted.begin() + static_cast<std::ptrdiff_t>(offset), size, mean);
    offset += size;
  }
  if (offset != tau.size()) throw ParameterError("stratum sizes do not cover tau");
  const double total = stats::variance(tau);
  return total > 0.0 ? stats::variance(fitted) / total : 0.0;
}

R2Dataset generate_r2_dataset(const R2BoundParams& params, double correlation,
                              std::uint64_t seed) {
  const std::size_t m = params.levels.size();
  const NegativeBinomialQuantile error_q(params.error_mean,
                                         params.error_dispersion);
  const double rho = correlation;
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  std::size_t total = 0;
  for (std::size_t s : params.stratum_sizes) total += s;
  std::vector<UnitRecord> units;
  units.reserve(total);
  std::vector<double> tau;
  tau.reserve(total);
  std::size_t next_id = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const NegativeBinomialQuantile eps_q(params.epsilon_means[j],
                                         params.epsilon_dispersion);
    // One substream per stratum; draws do not depend on the correlation.
    RandomStream rng(seed, j);
    for (std::size_t i = 0; i < params.stratum_sizes[j]; ++i) {
      const double z1 = rng.normal();
      const double z3 = rng.normal();
      const bool treated = rng.uniform() < params.treat_fraction;
      const double z2 = rho * z1 + rho_c * z3;
      const auto e = static_cast<double>(error_q(stats::normal_cdf(z1)));
      const double eps = static_cast<double>(eps_q(stats::normal_cdf(z2))) -
                         params.epsilon_means[j];
      const double y0 = params.control_means[j] + e;
      const double t = params.effect_means[j] + eps;
      UnitRecord u;
      u.unit_id = fmt::format("u{:09d}", next_id++);
      u.arm = treated ? Arm::kTreatment : Arm::kControl;
      u.outcome = treated ? y0 + t : y0;
      u.levels = {params.levels[j]};
      units.push_back(std::move(u));
      tau.push_back(t);
    }
  }
  std::vector<double> cates;
  std::size_t offset = 0;
  for (std::size_t s : params.stratum_sizes) {
    cates.push_back(stats::mean(std::span<const double>(tau.data() + offset, s)));
    offset += s;
  }
  const double r2 = true_r2(tau, params.stratum_sizes);
  return R2Dataset{ExperimentDataset({"stratum"}, std::move(units)),
                   std::move(tau), std::move(cates), r2};
}

R2BoundTable run_r2_bound_study(const SimScenario& scenario) {
  if (scenario.kind != ScenarioKind::kR2Bound) {
    throw ParameterError("kind: scenario is not an r2_bound scenario");
  }
  scenario.validate();
  const auto& params = scenario.r2;
  const std::size_t reps = scenario.replications;
  const std::size_t n_r = params.correlations.size();

  R2BoundTable table;
  table.replicates.assign(n_r, std::vector<R2BoundRow>(reps));
  parallel_for(n_r * reps, [&](std::size_t task) {
    const std::size_t ri = task / reps;
    const std::size_t rep = task % reps;
    const double r = params.correlations[ri];
    const R2Dataset sim =
        generate_r2_dataset(params, r, derive_seed(scenario.seed, kTagR2Data, rep));
    R2BoundRow row;
    row.correlation = r;
    row.true_r2 = sim.true_r2;
    row.stratified =
        r2_upper_bound(sim.data, "stratum", BoundMode::kStratified).r2_upper;
    row.unstratified =
        r2_upper_bound(sim.data, "stratum", BoundMode::kUnstratified).r2_upper;
    table.replicates[ri][rep] = row;
  });
  for (std::size_t ri = 0; ri < n_r; ++ri) {
    stats::CompensatedSum t, s, u;
    for (const auto& row : table.replicates[ri]) {
      t.add(row.true_r2);
      s.add(row.stratified);
      u.add(row.unstratified);
    }
    const auto n = static_cast<double>(reps);
    table.mean.push_back({params.correlations[ri], t.value() / n, s.value() / n,
                          u.value() / n});
  }
  return table;
}

}  // namespace hte
