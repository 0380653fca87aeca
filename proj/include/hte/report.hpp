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
#ifndef HTE_REPORT_HPP_
#define HTE_REPORT_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hte/detect.hpp"
#include "hte/error.hpp"
#include "hte/ite.hpp"
#include "hte/sim.hpp"
#include "hte/surface.hpp"

namespace hte {

// Bumped whenever a report layout changes.
inline constexpr int kSchemaVersion = 1;

// Text form used in every CSV: 17 significant digits, round-trip exact.
std::string format_double(double x);

nlohmann::json to_json(const DetectionResult& r);
nlohmann::json to_json(const FdrReport& r);
nlohmann::json to_json(const SurfacingResult& r);
nlohmann::json to_json(const CateTable& t);
nlohmann::json to_json(const IteProfile& p);
nlohmann::json to_json(const MixtureTable& t);
nlohmann::json to_json(const PowerTable& t);
nlohmann::json to_json(const R2BoundTable& t);
nlohmann::json to_json(const SimScenario& s);

// Documents wrapped with schema name and version.
nlohmann::json detection_report(const DetectionResult& r);
nlohmann::json fdr_report(const FdrReport& r);
nlohmann::json surfacing_report(const std::vector<SurfacingResult>& ranked);
// Paired stratified/unstratified rows, ranked by the stratified bound.
nlohmann::json surfacing_report(const std::vector<SurfacingResult>& stratified,
                                const std::vector<SurfacingResult>& unstratified);
nlohmann::json ite_report(const IteProfile& p, const MixtureTable& mixture);

// rank,breakdown,mode,r2_upper,explained_tev,idio_tev_lower,excluded_units
void write_surfacing_csv(std::ostream& out,
                         const std::vector<SurfacingResult>& ranked);
// rank,breakdown,r2_stratified,r2_unstratified,explained_tev,
// idio_stratified,idio_unstratified,excluded_units
void write_surfacing_pair_csv(std::ostream& out,
                              const std::vector<SurfacingResult>& stratified,
                              const std::vector<SurfacingResult>& unstratified);
// bin_left,bin_right,<level density>...,pooled
void write_histogram_csv(std::ostream& out, const IteProfile& p);
// bin_left,bin_right,<group weighted density>...,pooled
void write_mixture_csv(std::ostream& out, const MixtureTable& t);
// method,sigma,rejection_rate
void write_power_csv(std::ostream& out, const PowerTable& t);
// correlation,true_r2,stratified_bound,unstratified_bound
void write_r2_csv(std::ostream& out, const R2BoundTable& t);
// correlation,replication,true_r2,stratified_bound,unstratified_bound
void write_r2_replicates_csv(std::ostream& out, const R2BoundTable& t);

// A scenario document failed validation; pointer() locates the field.
class ScenarioError : public ValidationError {
 public:
  ScenarioError(std::string pointer, const std::string& what)
      : ValidationError(pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

// Missing fields take the documented defaults; unknown fields are rejected.
SimScenario scenario_from_json(const nlohmann::json& doc);

// Two columns, label and p-value; a header row is detected and skipped.
std::vector<LabeledPValue> read_pvalues_csv(std::istream& in);

}  // namespace hte

#endif  // HTE_REPORT_HPP_
