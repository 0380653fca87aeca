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
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "hte/dataset.hpp"
#include "hte/detect.hpp"
#include "hte/error.hpp"
#include "hte/ite.hpp"
#include "hte/parallel.hpp"
#include "hte/report.hpp"
#include "hte/sim.hpp"
#include "hte/surface.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;

struct InputFlags {
  std::string input;
  std::string outcome;
  std::string arm;
  std::string unit;
  bool tab = false;
  std::string delimiter = ",";
  std::vector<std::string> control_values{"0", "control"};
  std::vector<std::string> treatment_values{"1", "treatment"};
};

struct Run {
  std::string command;
  json parameters = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

void add_input_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--input", f.input, "Delimited input file with a header row")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--outcome", f.outcome, "Outcome column")->required();
  cmd->add_option("--arm", f.arm, "Arm column (values 0/1 or control/treatment)")
      ->required();
  cmd->add_option("--unit", f.unit,
                  "Unit id column; defaults to the data row number");
  cmd->add_option("--delimiter", f.delimiter, "Field delimiter (one character)")
      ->capture_default_str();
  cmd->add_flag("--tab", f.tab, "Tab-separated input; overrides --delimiter");
  cmd->add_option("--control-values", f.control_values,
                  "Arm values read as control")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--treatment-values", f.treatment_values,
                  "Arm values read as treatment")
      ->delimiter(',')
      ->capture_default_str();
}

hte::Schema make_schema(const InputFlags& f, std::vector<std::string> covariates) {
  hte::Schema s;
  s.unit_column = f.unit;
  s.arm_column = f.arm;
  s.outcome_column = f.outcome;
  s.covariate_columns = std::move(covariates);
  if (f.tab) {
    s.delimiter = '\t';
  } else if (f.delimiter.size() == 1) {
    s.delimiter = f.delimiter.front();
  } else {
    throw hte::ParameterError("--delimiter must be a single character");
  }
  s.control_values = f.control_values;
  s.treatment_values = f.treatment_values;
  return s;
}

void record_input_flags(Run& run, const InputFlags& f) {
  run.parameters["input"] = f.input;
  run.parameters["outcome"] = f.outcome;
  run.parameters["arm"] = f.arm;
  run.parameters["unit"] = f.unit;
  run.parameters["delimiter"] = f.tab ? std::string("\t") : f.delimiter;
  run.inputs.push_back(f.input);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json manifest_json(const Run& run, const std::vector<fs::path>& outputs) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start)
          .count();
  json m;
  m["schema"] = "hte.manifest";
  m["schema_version"] = hte::kSchemaVersion;
  m["command"] = run.command;
  m["parameters"] = run.parameters;
  m["inputs"] = json::array();
  for (const auto& in : run.inputs) {
    m["inputs"].push_back({{"path", in}, {"sha256", hte::cli::sha256_file(in)}});
  }
  m["seed"] = run.seed ? json(*run.seed) : json(nullptr);
  m["version"] = HTE_VERSION;
  m["threads"] = hte::thread_count();
  m["duration_seconds"] = seconds;
  m["outputs"] = json::array();
  for (const auto& out : outputs) {
    m["outputs"].push_back(
        {{"path", out.filename().string()}, {"sha256", hte::cli::sha256_file(out)}});
  }
  return m;
}

// Writes the primary JSON report (stdout when no path), any side files and
// a manifest beside the primary output.
void emit(const Run& run, const std::string& out_path, const json& report,
          const std::vector<std::pair<std::string, std::string>>& side_files = {}) {
  std::vector<fs::path> written;
  if (out_path.empty()) {
    std::cout << dump(report);
  } else {
    hte::cli::write_text(out_path, dump(report));
    written.emplace_back(out_path);
  }
  for (const auto& [path, text] : side_files) {
    if (path.empty()) continue;
    hte::cli::write_text(path, text);
    written.emplace_back(path);
  }
  if (!out_path.empty()) {
    hte::cli::write_text(hte::cli::manifest_path(out_path),
                         dump(manifest_json(run, written)));
  }
}

int cmd_detect(const InputFlags& f, const std::string& method_name,
               std::size_t b, std::size_t permutations, std::size_t grid,
               std::uint64_t seed, const std::string& out) {
  Run run{"detect"};
  record_input_flags(run, f);
  const auto method = hte::parse_detection_method(method_name);
  run.parameters["method"] = std::string(hte::to_string(method));
  const auto ds = hte::load_dataset(fs::path(f.input), make_schema(f, {}));
  hte::DetectionResult result;
  switch (method) {
    case hte::DetectionMethod::kKurtosis:
      result = hte::kurtosis_logvar_test(ds);
      break;
    case hte::DetectionMethod::kBootstrapF:
      run.parameters["b"] = b;
      run.seed = seed;
      result = hte::bootstrap_f_test(ds, {b, seed});
      break;
    case hte::DetectionMethod::kFrtKs:
      run.parameters["permutations"] = permutations;
      run.parameters["grid"] = grid;
      run.seed = seed;
      result = hte::frt_ks_test(ds, {permutations, grid, seed});
      break;
  }
  emit(run, out, hte::detection_report(result));
  return kExitOk;
}

int cmd_fdr(const std::string& pvalues, double alpha, const std::string& out) {
  Run run{"fdr"};
  run.parameters = {{"pvalues", pvalues}, {"alpha", alpha}};
  run.inputs.push_back(pvalues);
  std::ifstream in(pvalues, std::ios::binary);
  if (!in) throw hte::ValidationError(fmt::format("cannot open '{}'", pvalues));
  const auto report = hte::bh_adjust(hte::read_pvalues_csv(in), alpha);
  emit(run, out, hte::fdr_report(report));
  return kExitOk;
}

int cmd_surface(const InputFlags& f, const std::vector<std::string>& breakdowns,
                const std::string& mode, const std::string& out,
                const std::string& csv) {
  Run run{"surface"};
  record_input_flags(run, f);
  run.parameters["breakdowns"] = breakdowns;
  run.parameters["mode"] = mode;
  const auto ds = hte::load_dataset(fs::path(f.input), make_schema(f, breakdowns));
  std::ostringstream table;
  json report;
  if (mode == "both") {
    const auto strat = hte::rank_breakdowns(ds, breakdowns, hte::BoundMode::kStratified);
    const auto unstrat =
        hte::rank_breakdowns(ds, breakdowns, hte::BoundMode::kUnstratified);
    report = hte::surfacing_report(strat, unstrat);
    hte::write_surfacing_pair_csv(table, strat, unstrat);
  } else {
    const auto ranked = hte::rank_breakdowns(ds, breakdowns, hte::parse_bound_mode(mode));
    report = hte::surfacing_report(ranked);
    hte::write_surfacing_csv(table, ranked);
  }
  for (const auto& r : report["results"]) {
    const auto& row = r.contains("stratified") ? r["stratified"] : r;
    if (row["excluded_units"].get<std::size_t>() > 0) {
      std::cerr << fmt::format("hte: warning: breakdown '{}' excludes {} units "
                               "in strata missing an arm\n",
                               row["breakdown"].get<std::string>(),
                               row["excluded_units"].get<std::size_t>());
    }
  }
  emit(run, out, report, {{csv, table.str()}});
  return kExitOk;
}

std::vector<std::vector<std::string>> parse_merge(const std::vector<std::string>& groups) {
  std::vector<std::vector<std::string>> out;
  for (const auto& g : groups) {
    std::vector<std::string> levels;
    std::stringstream ss(g);
    std::string level;
    while (std::getline(ss, level, ',')) levels.push_back(level);
    out.push_back(std::move(levels));
  }
  return out;
}

int cmd_ite(const InputFlags& f, const std::string& breakdown,
            const std::vector<std::string>& merge,
            const std::vector<double>& quantiles, std::size_t max_bins,
            const std::string& out, const std::string& histogram,
            const std::string& mixture_csv) {
  Run run{"ite"};
  record_input_flags(run, f);
  run.parameters["breakdown"] = breakdown;
  run.parameters["merge"] = merge;
  run.parameters["max_bins"] = max_bins;
  hte::IteOptions options;
  if (!quantiles.empty()) options.quantile_levels = quantiles;
  options.max_bins = max_bins;
  run.parameters["quantiles"] = options.quantile_levels;
  const auto ds = hte::load_dataset(fs::path(f.input), make_schema(f, {breakdown}));
  const auto profile = hte::estimate_ites(ds, breakdown, options);
  const auto mixture = hte::mixture_decomposition(profile, parse_merge(merge));
  if (profile.excluded_units > 0) {
    std::cerr << fmt::format("hte: warning: {} units excluded (strata missing an arm)\n",
                             profile.excluded_units);
  }
  std::ostringstream hist;
  hte::write_histogram_csv(hist, profile);
  std::ostringstream mix;
  hte::write_mixture_csv(mix, mixture);
  emit(run, out, hte::ite_report(profile, mixture),
       {{histogram, hist.str()}, {mixture_csv, mix.str()}});
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> replications, const std::string& out_dir) {
  Run run{"simulate"};
  run.inputs.push_back(scenario_path);
  std::ifstream in(scenario_path, std::ios::binary);
  if (!in) throw hte::ValidationError(fmt::format("cannot open '{}'", scenario_path));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw hte::ScenarioError("", fmt::format("not valid JSON: {}", e.what()));
  }
  auto scenario = hte::scenario_from_json(doc);
  if (seed) scenario.seed = *seed;
  if (replications) scenario.replications = *replications;
  scenario.validate();
  run.seed = scenario.seed;
  run.parameters = hte::to_json(scenario);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::vector<fs::path> written;
  json summary;
  summary["schema"] = "hte.simulation";
  summary["schema_version"] = hte::kSchemaVersion;
  summary["scenario"] = hte::to_json(scenario);
  if (scenario.kind == hte::ScenarioKind::kDetectionPower) {
    const auto table = hte::run_detection_power_study(scenario);
    std::ostringstream csv;
    hte::write_power_csv(csv, table);
    hte::cli::write_text(dir / "power.csv", csv.str());
    written.push_back(dir / "power.csv");
    summary["power"] = hte::to_json(table);
  } else {
    const auto table = hte::run_r2_bound_study(scenario);
    std::ostringstream csv;
    hte::write_r2_csv(csv, table);
    hte::cli::write_text(dir / "r2_bounds.csv", csv.str());
    written.push_back(dir / "r2_bounds.csv");
    std::ostringstream reps;
    hte::write_r2_replicates_csv(reps, table);
    hte::cli::write_text(dir / "r2_replicates.csv", reps.str());
    written.push_back(dir / "r2_replicates.csv");
    summary["r2_bound"] = hte::to_json(table);
  }
  hte::cli::write_text(dir / "summary.json", dump(summary));
  written.push_back(dir / "summary.json");
  hte::cli::write_text(dir / "manifest.json", dump(manifest_json(run, written)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous treatment effect analysis for randomized experiments"};
  app.set_version_flag("--version", HTE_VERSION);
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads for analysis loops (default 1; env HTE_THREADS)")
      ->envname("HTE_THREADS")
      ->check(CLI::Range(1, 1024));

  InputFlags detect_in;
  std::string method = "kurtosis";
  std::size_t b = 200;
  std::size_t permutations = 1000;
  std::size_t grid = 21;
  std::uint64_t seed = 0;
  std::string detect_out;
  auto* detect = app.add_subcommand("detect", "Global heterogeneity test on one metric");
  add_input_flags(detect, detect_in);
  detect->add_option("--method", method, "kurtosis | bootstrap-f | frt")
      ->check(CLI::IsMember({"kurtosis", "bootstrap-f", "bootstrap_f", "frt", "frt_ks"}))
      ->capture_default_str();
  detect->add_option("--b", b, "Bootstrap resamples per arm (bootstrap-f)")
      ->capture_default_str();
  detect->add_option("--permutations", permutations, "Label permutations (frt)")
      ->capture_default_str();
  detect->add_option("--grid", grid, "Constant-effect grid points (frt)")
      ->capture_default_str();
  detect->add_option("--seed", seed, "Random seed")->capture_default_str();
  detect->add_option("--out", detect_out, "JSON report path; stdout when omitted");

  std::string pvalues;
  double alpha = 0.05;
  std::string fdr_out;
  auto* fdr = app.add_subcommand("fdr", "Benjamini-Hochberg step-up over p-values");
  fdr->add_option("--pvalues", pvalues, "CSV of label,p rows (header optional)")
      ->required()
      ->check(CLI::ExistingFile);
  fdr->add_option("--alpha", alpha, "Nominal FDR level")->capture_default_str();
  fdr->add_option("--out", fdr_out, "JSON report path; stdout when omitted");

  InputFlags surface_in;
  std::vector<std::string> breakdowns;
  std::string mode = "stratified";
  std::string surface_out;
  std::string surface_csv;
  auto* surface = app.add_subcommand("surface", "Rank breakdowns by the R2 upper bound");
  add_input_flags(surface, surface_in);
  surface->add_option("--breakdowns", breakdowns, "Covariate columns, comma separated")
      ->required()
      ->delimiter(',');
  surface->add_option("--mode", mode, "stratified | unstratified | both")
      ->check(CLI::IsMember({"stratified", "unstratified", "both"}))
      ->capture_default_str();
  surface->add_option("--out", surface_out, "JSON report path; stdout when omitted");
  surface->add_option("--csv", surface_csv, "Ranked bar table CSV path");

  InputFlags ite_in;
  std::string breakdown;
  std::vector<std::string> merge;
  std::vector<double> quantiles;
  std::size_t max_bins = 512;
  std::string ite_out;
  std::string ite_hist;
  std::string ite_mix;
  auto* ite = app.add_subcommand("ite", "Per-unit ITEs and their mixture by stratum");
  add_input_flags(ite, ite_in);
  ite->add_option("--breakdown", breakdown, "Covariate column")->required();
  ite->add_option("--merge", merge,
                  "Levels to plot as one group, comma separated; repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ite->add_option("--quantiles", quantiles,
                  "Quantile levels, comma separated (default 0.05,0.10,...,0.95)")
      ->delimiter(',');
  ite->add_option("--max-bins", max_bins, "Histogram bin cap")->capture_default_str();
  ite->add_option("--out", ite_out, "JSON report path; stdout when omitted");
  ite->add_option("--histogram", ite_hist, "Per-stratum histogram CSV path");
  ite->add_option("--mixture", ite_mix, "Mixture table CSV path");

  std::string scenario;
  std::uint64_t sim_seed = 0;
  std::size_t sim_reps = 0;
  std::string sim_out = "sim_out";
  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  simulate->add_option("--scenario", scenario, "Scenario JSON document")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Overrides the scenario seed");
  auto* reps_opt = simulate->add_option("--replications", sim_reps,
                                        "Overrides the scenario replications");
  simulate->add_option("--out", sim_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "hte: error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    if (threads > 0) hte::set_thread_count(threads);
    if (detect->parsed()) {
      return cmd_detect(detect_in, method, b, permutations, grid, seed, detect_out);
    }
    if (fdr->parsed()) return cmd_fdr(pvalues, alpha, fdr_out);
    if (surface->parsed()) {
      return cmd_surface(surface_in, breakdowns, mode, surface_out, surface_csv);
    }
    if (ite->parsed()) {
      return cmd_ite(ite_in, breakdown, merge, quantiles, max_bins, ite_out, ite_hist,
                     ite_mix);
    }
    if (simulate->parsed()) {
      return cmd_simulate(
          scenario, seed_opt->count() ? std::optional<std::uint64_t>(sim_seed) : std::nullopt,
          reps_opt->count() ? std::optional<std::size_t>(sim_reps) : std::nullopt,
          sim_out);
    }
  } catch (const hte::Error& e) {
    std::cerr << "hte: error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "hte: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
