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
#include "hte/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace hte {

using nlohmann::json;

namespace {

json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

json versioned(std::string_view schema, json body) {
  json doc;
  doc["schema"] = schema;
  doc["schema_version"] = kSchemaVersion;
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  return doc;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return !text.empty() && ec == std::errc() && ptr == end;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// Typed access into a scenario object with JSON-pointer error locations.
class ScenarioReader {
 public:
  explicit ScenarioReader(const json& doc) : doc_(doc) {
    if (!doc.is_object()) throw ScenarioError("", "scenario must be a JSON object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return doc_.contains(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number()) throw ScenarioError("/" + key, "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_unsigned()) {
      throw ScenarioError("/" + key, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) throw ScenarioError("/" + key, "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_string()) throw ScenarioError("/" + key, "expected a string");
    return v.get<std::string>();
  }

  template <typename T, typename Check>
  std::vector<T> array(const std::string& key, std::vector<T> fallback,
                       Check&& check, std::string_view requirement) {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_array()) throw ScenarioError("/" + key, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string ptr = fmt::format("/{}/{}", key, i);
      const auto& item = v[i];
      if constexpr (std::is_same_v<T, std::string>) {
        if (!item.is_string()) throw ScenarioError(ptr, "expected a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!item.is_number_unsigned()) {
          throw ScenarioError(ptr, "expected a non-negative integer");
        }
      } else {
        if (!item.is_number()) throw ScenarioError(ptr, "expected a number");
      }
      T value = item.get<T>();
      if (!check(value)) throw ScenarioError(ptr, std::string(requirement));
      out.push_back(std::move(value));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!used_.count(key)) throw ScenarioError("/" + key, "unknown field");
    }
  }

 private:
  const json& doc_;
  std::set<std::string> used_;
};

}  // namespace

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

json to_json(const DetectionResult& r) {
  json j;
  j["method"] = to_string(r.method);
  j["statistic"] = number_or_null(r.statistic);
  j["p_value"] = r.p_value;
  j["var_treat"] = r.var_treat;
  j["var_control"] = r.var_control;
  j["kurt_treat"] = r.kurt_treat;
  j["kurt_control"] = r.kurt_control;
  j["n_treat"] = r.n_treat;
  j["n_control"] = r.n_control;
  if (r.method == DetectionMethod::kFrtKs) {
    j["grid_shifts"] = r.grid_shifts;
    j["grid_p_values"] = r.grid_p_values;
  }
  return j;
}

json to_json(const FdrReport& r) {
  json j;
  j["alpha"] = r.alpha;
  j["threshold"] = r.threshold;
  j["rejected"] = r.rejected;
  j["inputs"] = json::array();
  for (const auto& in : r.inputs) {
    j["inputs"].push_back({{"label", in.label}, {"p_value", in.p_value}});
  }
  return j;
}

json to_json(const SurfacingResult& r) {
  return {{"breakdown", r.breakdown},
          {"explained_tev", r.explained_tev},
          {"idio_tev_lower", r.idio_tev_lower},
          {"r2_upper", r.r2_upper},
          {"mode", to_string(r.mode)},
          {"excluded_units", r.excluded_units},
          {"matched_units", r.matched_units}};
}

json to_json(const CateTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"level", r.level},
                    {"n_control", r.n_control},
                    {"n_treat", r.n_treat},
                    {"mean_control", r.mean_control},
                    {"mean_treat", r.mean_treat},
                    {"cate", r.cate}});
  }
  return {{"breakdown", t.breakdown},
          {"rows", rows},
          {"excluded_units", t.excluded_units}};
}

json to_json(const IteProfile& p) {
  json strata = json::array();
  for (const auto& s : p.strata) {
    strata.push_back({{"level", s.level},
                      {"n", s.n},
                      {"weight", s.weight},
                      {"cate", s.cate},
                      {"mean_difference", s.mean_difference},
                      {"quantiles", s.quantiles},
                      {"counts", s.counts},
                      {"density", s.density()}});
  }
  return {{"breakdown", p.breakdown},
          {"matched_units", p.matched_units},
          {"excluded_units", p.excluded_units},
          {"quantile_levels", p.quantile_levels},
          {"bin_edges", p.bin_edges},
          {"strata", strata},
          {"pooled_counts", p.pooled_counts},
          {"pooled_density", p.pooled_density()}};
}

json to_json(const MixtureTable& t) {
  json groups = json::array();
  for (const auto& g : t.groups) {
    groups.push_back({{"label", g.label},
                      {"levels", g.levels},
                      {"n", g.n},
                      {"weight", g.weight},
                      {"counts", g.counts},
                      {"weighted_density", g.weighted_density}});
  }
  return {{"bin_edges", t.bin_edges},
          {"groups", groups},
          {"pooled_counts", t.pooled_counts},
          {"pooled_density", t.pooled_density},
          {"total", t.total}};
}

json to_json(const PowerTable& t) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    cells.push_back({{"method", to_string(c.method)},
                     {"sigma", c.sigma},
                     {"rejection_rate", c.rejection_rate}});
  }
  return {{"alpha", t.alpha},
          {"bh_applied", t.bh_applied},
          {"replications", t.replications},
          {"cells", cells}};
}

json to_json(const R2BoundTable& t) {
  json rows = json::array();
  for (const auto& r : t.mean) {
    rows.push_back({{"correlation", r.correlation},
                    {"true_r2", r.true_r2},
                    {"stratified_bound", r.stratified},
                    {"unstratified_bound", r.unstratified}});
  }
  return {{"rows", rows},
          {"replications", t.replicates.empty() ? 0 : t.replicates.front().size()}};
}

json to_json(const SimScenario& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["seed"] = s.seed;
  j["replications"] = s.replications;
  j["alpha"] = s.alpha;
  if (s.kind == ScenarioKind::kDetectionPower) {
    const auto& d = s.detection;
    j["n_units"] = d.n_units;
    j["nb_mean"] = d.nb_mean;
    j["nb_dispersion"] = d.nb_dispersion;
    j["lognormal_log_mean"] = d.lognormal_log_mean;
    j["sigma_grid"] = d.sigma_grid;
    j["bootstraps"] = d.bootstraps;
    j["frt_permutations"] = d.frt_permutations;
    j["frt_grid"] = d.frt_grid;
    j["apply_bh"] = d.apply_bh;
    j["pre_period_adjust"] = d.pre_period_adjust;
    j["methods"] = json::array();
    for (auto m : d.methods) j["methods"].push_back(to_string(m));
  } else {
    const auto& r = s.r2;
    j["levels"] = r.levels;
    j["stratum_sizes"] = r.stratum_sizes;
    j["control_means"] = r.control_means;
    j["effect_means"] = r.effect_means;
    j["epsilon_means"] = r.epsilon_means;
    j["epsilon_dispersion"] = r.epsilon_dispersion;
    j["error_mean"] = r.error_mean;
    j["error_dispersion"] = r.error_dispersion;
    j["correlations"] = r.correlations;
    j["treat_fraction"] = r.treat_fraction;
  }
  return j;
}

json detection_report(const DetectionResult& r) {
  return versioned("hte.detection", to_json(r));
}

json fdr_report(const FdrReport& r) { return versioned("hte.fdr", to_json(r)); }

json surfacing_report(const std::vector<SurfacingResult>& ranked) {
  json results = json::array();
  for (const auto& r : ranked) results.push_back(to_json(r));
  return versioned("hte.surfacing", {{"results", results}});
}

json surfacing_report(const std::vector<SurfacingResult>& stratified,
                      const std::vector<SurfacingResult>& unstratified) {
  json results = json::array();
  for (const auto& s : stratified) {
    const auto it = std::find_if(
        unstratified.begin(), unstratified.end(),
        [&](const SurfacingResult& u) { return u.breakdown == s.breakdown; });
    if (it == unstratified.end()) {
      throw AnalysisError("paired surfacing results do not match");
    }
    results.push_back({{"breakdown", s.breakdown},
                       {"stratified", to_json(s)},
                       {"unstratified", to_json(*it)}});
  }
  return versioned("hte.surfacing_pair", {{"results", results}});
}

json ite_report(const IteProfile& p, const MixtureTable& mixture) {
  return versioned("hte.ite", {{"profile", to_json(p)}, {"mixture", to_json(mixture)}});
}

void write_surfacing_csv(std::ostream& out,
                         const std::vector<SurfacingResult>& ranked) {
  out << "rank,breakdown,mode,r2_upper,explained_tev,idio_tev_lower,"
         "excluded_units\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << i + 1 << ',' << csv_field(r.breakdown) << ',' << to_string(r.mode)
        << ',' << format_double(r.r2_upper) << ','
        << format_double(r.explained_tev) << ','
        << format_double(r.idio_tev_lower) << ',' << r.excluded_units << '\n';
  }
}

void write_surfacing_pair_csv(std::ostream& out,
                              const std::vector<SurfacingResult>& stratified,
                              const std::vector<SurfacingResult>& unstratified) {
  out << "rank,breakdown,r2_stratified,r2_unstratified,explained_tev,"
         "idio_stratified,idio_unstratified,excluded_units\n";
  for (std::size_t i = 0; i < stratified.size(); ++i) {
    const auto& s = stratified[i];
    const auto it = std::find_if(
        unstratified.begin(), unstratified.end(),
        [&](const SurfacingResult& u) { return u.breakdown == s.breakdown; });
    if (it == unstratified.end()) {
      throw AnalysisError("paired surfacing results do not match");
    }
    out << i + 1 << ',' << csv_field(s.breakdown) << ','
        << format_double(s.r2_upper) << ',' << format_double(it->r2_upper)
        << ',' << format_double(s.explained_tev) << ','
        << format_double(s.idio_tev_lower) << ','
        << format_double(it->idio_tev_lower) << ',' << s.excluded_units << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const IteProfile& p) {
  out << "bin_left,bin_right";
  for (const auto& s : p.strata) out << ',' << csv_field(s.level);
  out << ",pooled\n";
  std::vector<std::vector<double>> densities;
  for (const auto& s : p.strata) densities.push_back(s.density());
  const auto pooled = p.pooled_density();
  for (std::size_t b = 0; b < p.bin_count(); ++b) {
    out << format_double(p.bin_edges[b]) << ',' << format_double(p.bin_edges[b + 1]);
    for (const auto& d : densities) out << ',' << format_double(d[b]);
    out << ',' << format_double(pooled[b]) << '\n';
  }
}

void write_mixture_csv(std::ostream& out, const MixtureTable& t) {
  out << "bin_left,bin_right";
  for (const auto& g : t.groups) out << ',' << csv_field(g.label);
  out << ",pooled\n";
  for (std::size_t b = 0; b + 1 < t.bin_edges.size(); ++b) {
    out << format_double(t.bin_edges[b]) << ',' << format_double(t.bin_edges[b + 1]);
    for (const auto& g : t.groups) out << ',' << format_double(g.weighted_density[b]);
    out << ',' << format_double(t.pooled_density[b]) << '\n';
  }
}

void write_power_csv(std::ostream& out, const PowerTable& t) {
  out << "method,sigma,rejection_rate\n";
  for (const auto& c : t.cells) {
    out << to_string(c.method) << ',' << format_double(c.sigma) << ','
        << format_double(c.rejection_rate) << '\n';
  }
}

void write_r2_csv(std::ostream& out, const R2BoundTable& t) {
  out << "correlation,true_r2,stratified_bound,unstratified_bound\n";
  for (const auto& r : t.mean) {
    out << format_double(r.correlation) << ',' << format_double(r.true_r2) << ','
        << format_double(r.stratified) << ',' << format_double(r.unstratified)
        << '\n';
  }
}

void write_r2_replicates_csv(std::ostream& out, const R2BoundTable& t) {
  out << "correlation,replication,true_r2,stratified_bound,unstratified_bound\n";
  for (const auto& rows : t.replicates) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out << format_double(r.correlation) << ',' << i << ','
          << format_double(r.true_r2) << ',' << format_double(r.stratified)
          << ',' << format_double(r.unstratified) << '\n';
    }
  }
}

SimScenario scenario_from_json(const json& doc) {
  ScenarioReader in(doc);
  SimScenario s;
  if (!in.has("kind")) throw ScenarioError("/kind", "missing required field");
  const std::string kind = in.text("kind", "");
  if (kind == "detection_power") {
    s.kind = ScenarioKind::kDetectionPower;
  } else if (kind == "r2_bound") {
    s.kind = ScenarioKind::kR2Bound;
    s.replications = 20;
  } else {
    throw ScenarioError("/kind", "expected \"detection_power\" or \"r2_bound\"");
  }
  s.seed = in.unsigned_integer("seed", s.seed);
  s.replications = in.unsigned_integer("replications", s.replications);
  s.alpha = in.number("alpha", s.alpha);

  const auto any = [](const auto&) { return true; };
  if (s.kind == ScenarioKind::kDetectionPower) {
    auto& d = s.detection;
    d.n_units = in.unsigned_integer("n_units", d.n_units);
    d.nb_mean = in.number("nb_mean", d.nb_mean);
    d.nb_dispersion = in.number("nb_dispersion", d.nb_dispersion);
    d.lognormal_log_mean = in.number("lognormal_log_mean", d.lognormal_log_mean);
    d.sigma_grid = in.array<double>(
        "sigma_grid", d.sigma_grid, [](double x) { return x >= 0.0; },
        "must be >= 0");
    d.bootstraps = in.unsigned_integer("bootstraps", d.bootstraps);
    d.frt_permutations = in.unsigned_integer("frt_permutations", d.frt_permutations);
    d.frt_grid = in.unsigned_integer("frt_grid", d.frt_grid);
    d.apply_bh = in.boolean("apply_bh", d.apply_bh);
    d.pre_period_adjust = in.boolean("pre_period_adjust", d.pre_period_adjust);
    if (in.has("methods")) {
      const auto names = in.array<std::string>(
          "methods", {},
          [](const std::string& m) {
            return m == "kurtosis" || m == "bootstrap_f" || m == "frt_ks";
          },
          "expected \"kurtosis\", \"bootstrap_f\" or \"frt_ks\"");
      d.methods.clear();
      for (const auto& m : names) d.methods.push_back(parse_detection_method(m));
    }
  } else {
    auto& r = s.r2;
    r.levels = in.array<std::string>("levels", r.levels, any, "");
    r.stratum_sizes = in.array<std::size_t>(
        "stratum_sizes", r.stratum_sizes, [](std::size_t n) { return n >= 4; },
        "must be at least 4");
    r.control_means = in.array<double>("control_means", r.control_means, any, "");
    r.effect_means = in.array<double>("effect_means", r.effect_means, any, "");
    r.epsilon_means = in.array<double>(
        "epsilon_means", r.epsilon_means, [](double x) { return x > 0.0; },
        "must be positive");
    r.epsilon_dispersion = in.number("epsilon_dispersion", r.epsilon_dispersion);
    r.error_mean = in.number("error_mean", r.error_mean);
    r.error_dispersion = in.number("error_dispersion", r.error_dispersion);
    r.correlations = in.array<double>(
        "correlations", r.correlations,
        [](double x) { return x >= 0.0 && x <= 1.0; }, "must lie in [0, 1]");
    r.treat_fraction = in.number("treat_fraction", r.treat_fraction);
  }
  in.reject_unknown();
  try {
    s.validate();
  } catch (const ParameterError& e) {
    const std::string what = e.what();
    const auto colon = what.find(':');
    throw ScenarioError("/" + what.substr(0, colon),
                        colon == std::string::npos ? what : what.substr(colon + 2));
  }
  return s;
}

std::vector<LabeledPValue> read_pvalues_csv(std::istream& in) {
  std::vector<LabeledPValue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw RowError(line_no, "expected two columns: label,p");
    }
    std::string label(trim(std::string_view(line).substr(0, comma)));
    if (label.size() >= 2 && label.front() == '"' && label.back() == '"') {
      label = label.substr(1, label.size() - 2);
    }
    const std::string_view value = std::string_view(line).substr(comma + 1);
    double p = 0.0;
    if (!parse_double(value, p)) {
      if (out.empty() && line_no == 1) continue;  // header
      throw RowError(line_no, fmt::format("p-value '{}' is not a number", trim(value)));
    }
    if (!(p >= 0.0 && p <= 1.0)) {
      throw RowError(line_no, fmt::format("p-value {} outside [0, 1]", p));
    }
    out.push_back({std::move(label), p});
  }
  if (out.empty()) throw ValidationError("no p-values found");
  return out;
}

}  // namespace hte
