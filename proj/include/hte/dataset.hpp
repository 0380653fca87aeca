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
#ifndef HTE_DATASET_HPP_
#define HTE_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hte {

enum class Arm : std::uint8_t { kControl = 0, kTreatment = 1 };

// Level assigned to empty covariate cells.
inline constexpr std::string_view kMissingLevel = "__missing__";

// One experimental unit. `levels` is aligned with the owning dataset's
// covariate names.
struct UnitRecord {
  std::string unit_id;
  Arm arm = Arm::kControl;
  double outcome = 0.0;
  std::vector<std::string> levels;

  bool operator==(const UnitRecord&) const = default;
};

// Column roles for delimited input.
struct Schema {
  std::string unit_column;  // empty: ids are the 1-based data row numbers
  std::string arm_column;
  std::string outcome_column;
  std::vector<std::string> covariate_columns;
  char delimiter = ',';
  std::vector<std::string> control_values{"0", "control"};
  std::vector<std::string> treatment_values{"1", "treatment"};
};

// Validated, immutable experiment table.
class ExperimentDataset {
 public:
  // Validates: unique ids, finite outcomes, level vectors sized to
  // `covariate_names`, at least two units per arm.
  ExperimentDataset(std::vector<std::string> covariate_names,
                    std::vector<UnitRecord> units);

  const std::vector<UnitRecord>& units() const noexcept { return units_; }
  const UnitRecord& unit(std::size_t i) const { return units_.at(i); }
  const std::vector<std::string>& covariate_names() const noexcept {
    return covariate_names_;
  }

  std::size_t n_total() const noexcept { return units_.size(); }
  std::size_t n_treat() const noexcept { return n_treat_; }
  std::size_t n_control() const noexcept { return units_.size() - n_treat_; }

  // Throws LookupError for unknown names.
  std::size_t covariate_index(std::string_view name) const;
  const std::string& level(std::size_t unit, std::size_t covariate) const {
    return units_[unit].levels[covariate];
  }

  // Position of unit i's id in lexicographic id order. Used as the
  // deterministic tie-breaker wherever units are sorted.
  std::uint32_t id_rank(std::size_t i) const noexcept { return id_rank_[i]; }

  // Outcomes of one arm in dataset order.
  std::vector<double> outcomes(Arm arm) const;

  bool operator==(const ExperimentDataset& other) const {
    return covariate_names_ == other.covariate_names_ && units_ == other.units_;
  }

 private:
  std::vector<std::string> covariate_names_;
  std::vector<UnitRecord> units_;
  std::vector<std::uint32_t> id_rank_;
  std::size_t n_treat_ = 0;
};

ExperimentDataset load_dataset(std::istream& source, const Schema& schema);
ExperimentDataset load_dataset(const std::filesystem::path& path,
                               const Schema& schema);

// Writes columns unit_id, arm (0/1), outcome, covariates... Outcomes use 17
// significant digits so reloading with `round_trip_schema` is bit-exact.
void write_dataset(std::ostream& out, const ExperimentDataset& ds,
                   char delimiter = ',');
Schema round_trip_schema(const ExperimentDataset& ds, char delimiter = ',');

struct Stratum {
  std::string level;
  std::vector<std::size_t> control;    // unit indices, dataset order
  std::vector<std::size_t> treatment;  // unit indices, dataset order

  std::size_t n_control() const noexcept { return control.size(); }
  std::size_t n_treat() const noexcept { return treatment.size(); }
  std::size_t size() const noexcept { return control.size() + treatment.size(); }
  // Both arms present; otherwise the stratum is "unmatched".
  bool matchable() const noexcept { return !control.empty() && !treatment.empty(); }
};

struct StrataIndex {
  std::string breakdown;
  std::vector<Stratum> strata;  // sorted by level

  std::size_t m_count() const noexcept { return strata.size(); }
  std::size_t matchable_count() const noexcept;
  // Units in strata lacking one arm.
  std::size_t excluded_units() const noexcept;
};

StrataIndex build_strata(const ExperimentDataset& ds, std::string_view breakdown);

}  // namespace hte

#endif  // HTE_DATASET_HPP_
