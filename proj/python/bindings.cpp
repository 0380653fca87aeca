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
// Python bindings. Results are returned as the same dictionaries the CLI
// writes as JSON.
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hte/dataset.hpp"
#include "hte/detect.hpp"
#include "hte/error.hpp"
#include "hte/ite.hpp"
#include "hte/parallel.hpp"
#include "hte/report.hpp"
#include "hte/sim.hpp"
#include "hte/surface.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get_ref<const std::string&>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return std::move(out);
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return std::move(out);
    }
    default:
      throw std::runtime_error("unsupported JSON value");
  }
}

json from_py(const py::handle& h) {
  return json::parse(py::module_::import("json").attr("dumps")(h).cast<std::string>());
}

hte::ExperimentDataset make_dataset(const std::vector<std::string>& unit_ids,
                                    const std::vector<int>& arms,
                                    const std::vector<double>& outcomes,
                                    const std::map<std::string, std::vector<std::string>>&
                                        covariates) {
  const std::size_t n = outcomes.size();
  if (arms.size() != n) throw hte::ValidationError("arms and outcomes differ in length");
  if (!unit_ids.empty() && unit_ids.size() != n) {
    throw hte::ValidationError("unit_ids and outcomes differ in length");
  }
  std::vector<std::string> names;
  for (const auto& [name, levels] : covariates) {
    if (levels.size() != n) {
      throw hte::ValidationError("covariate '" + name + "' differs in length");
    }
    names.push_back(name);
  }
  std::vector<hte::UnitRecord> units(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = units[i];
    u.unit_id = unit_ids.empty() ? std::to_string(i + 1) : unit_ids[i];
    if (arms[i] != 0 && arms[i] != 1) {
      throw hte::ValidationError("arm values must be 0 or 1");
    }
    u.arm = arms[i] ? hte::Arm::kTreatment : hte::Arm::kControl;
    u.outcome = outcomes[i];
    for (const auto& name : names) {
      const auto& level = covariates.at(name)[i];
      u.levels.push_back(level.empty() ? std::string(hte::kMissingLevel) : level);
    }
  }
  return hte::ExperimentDataset(std::move(names), std::move(units));
}

}  // namespace

PYBIND11_MODULE(_hte, m) {
  m.doc() = "Heterogeneous treatment effect analysis";
  m.attr("__version__") = HTE_VERSION;

  py::register_exception<hte::Error>(m, "HteError", PyExc_ValueError);

  m.def("set_threads", &hte::set_thread_count, py::arg("threads"));
  m.def("threads", &hte::thread_count);

  py::class_<hte::ExperimentDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("unit_ids"), py::arg("arms"),
           py::arg("outcomes"),
           py::arg("covariates") = std::map<std::string, std::vector<std::string>>{})
      .def_static(
          "from_csv",
          [](const std::filesystem::path& path, const std::string& outcome,
             const std::string& arm, const std::string& unit,
             const std::vector<std::string>& covariates, char delimiter) {
            hte::Schema s;
            s.outcome_column = outcome;
            s.arm_column = arm;
            s.unit_column = unit;
            s.covariate_columns = covariates;
            s.delimiter = delimiter;
            return hte::load_dataset(path, s);
          },
          py::arg("path"), py::arg("outcome"), py::arg("arm"), py::arg("unit") = "",
          py::arg("covariates") = std::vector<std::string>{}, py::arg("delimiter") = ',')
      .def_property_readonly("n_total", &hte::ExperimentDataset::n_total)
      .def_property_readonly("n_treat", &hte::ExperimentDataset::n_treat)
      .def_property_readonly("n_control", &hte::ExperimentDataset::n_control)
      .def_property_readonly("covariates", &hte::ExperimentDataset::covariate_names)
      .def("outcomes", [](const hte::ExperimentDataset& ds, int arm) {
        return ds.outcomes(arm ? hte::Arm::kTreatment : hte::Arm::kControl);
      }, py::arg("arm"))
      .def("__len__", &hte::ExperimentDataset::n_total);

  m.def(
      "detect",
      [](const hte::ExperimentDataset& ds, const std::string& method,
         std::size_t bootstraps, std::size_t permutations, std::size_t grid,
         std::uint64_t seed) {
        hte::DetectionResult r;
        switch (hte::parse_detection_method(method)) {
          case hte::DetectionMethod::kKurtosis:
            r = hte::kurtosis_logvar_test(ds);
            break;
          case hte::DetectionMethod::kBootstrapF:
            r = hte::bootstrap_f_test(ds, {bootstraps, seed});
            break;
          case hte::DetectionMethod::kFrtKs:
            r = hte::frt_ks_test(ds, {permutations, grid, seed});
            break;
        }
        return to_py(hte::detection_report(r));
      },
      py::arg("dataset"), py::arg("method") = "kurtosis", py::arg("bootstraps") = 200,
      py::arg("permutations") = 1000, py::arg("grid") = 21, py::arg("seed") = 0);

  m.def(
      "kurtosis_test",
      [](const std::vector<double>& treatment, const std::vector<double>& control) {
        return to_py(hte::detection_report(hte::kurtosis_logvar_test(treatment, control)));
      },
      py::arg("treatment"), py::arg("control"));

  m.def(
      "fdr",
      [](const py::dict& pvalues, double alpha) {
        std::vector<hte::LabeledPValue> in;
        for (const auto& [label, p] : pvalues) {
          in.push_back({py::str(label).cast<std::string>(), p.cast<double>()});
        }
        return to_py(hte::fdr_report(hte::bh_adjust(std::move(in), alpha)));
      },
      py::arg("pvalues"), py::arg("alpha") = 0.05);

  m.def(
      "surface",
      [](const hte::ExperimentDataset& ds, const std::vector<std::string>& breakdowns,
         const std::string& mode) {
        if (mode == "both") {
          return to_py(hte::surfacing_report(
              hte::rank_breakdowns(ds, breakdowns, hte::BoundMode::kStratified),
              hte::rank_breakdowns(ds, breakdowns, hte::BoundMode::kUnstratified)));
        }
        return to_py(hte::surfacing_report(
            hte::rank_breakdowns(ds, breakdowns, hte::parse_bound_mode(mode))));
      },
      py::arg("dataset"), py::arg("breakdowns"), py::arg("mode") = "stratified");

  m.def(
      "ite",
      [](const hte::ExperimentDataset& ds, const std::string& breakdown,
         const std::vector<std::vector<std::string>>& merge,
         std::optional<std::vector<double>> quantiles, std::size_t max_bins) {
        hte::IteOptions options;
        if (quantiles) options.quantile_levels = *quantiles;
        options.max_bins = max_bins;
        const auto profile = hte::estimate_ites(ds, breakdown, options);
        py::dict out = to_py(hte::ite_report(profile,
                                             hte::mixture_decomposition(profile, merge)));
        out["tau_hat"] = profile.tau_hat;
        return out;
      },
      py::arg("dataset"), py::arg("breakdown"),
      py::arg("merge") = std::vector<std::vector<std::string>>{},
      py::arg("quantiles") = py::none(), py::arg("max_bins") = 512);

  m.def(
      "simulate",
      [](const py::dict& scenario) {
        const auto s = hte::scenario_from_json(from_py(scenario));
        json summary;
        summary["schema"] = "hte.simulation";
        summary["schema_version"] = hte::kSchemaVersion;
        summary["scenario"] = hte::to_json(s);
        if (s.kind == hte::ScenarioKind::kDetectionPower) {
          summary["power"] = hte::to_json(hte::run_detection_power_study(s));
        } else {
          summary["r2_bound"] = hte::to_json(hte::run_r2_bound_study(s));
        }
        return to_py(summary);
      },
      py::arg("scenario"));
}
