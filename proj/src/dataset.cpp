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
#include "hte/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "hte/error.hpp"

namespace hte {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits one record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(std::string_view line, char delim,
                                      std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw RowError(line_no, "unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name, std::string_view role) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw SchemaError(
        fmt::format("{} column '{}' not found in header", role, name));
  }
  return static_cast<std::size_t>(it - header.begin());
}

bool contains(const std::vector<std::string>& values, std::string_view v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

ExperimentDataset::ExperimentDataset(std::vector<std::string> covariate_names,
                                     std::vector<UnitRecord> units)
    : covariate_names_(std::move(covariate_names)), units_(std::move(units)) {
  {
    auto sorted_names = covariate_names_;
    std::sort(sorted_names.begin(), sorted_names.end());
    if (std::adjacent_find(sorted_names.begin(), sorted_names.end()) !=
        sorted_names.end()) {
      throw ValidationError("duplicate covariate name");
    }
  }
  for (const auto& u : units_) {
    if (!std::isfinite(u.outcome)) {
      throw ValidationError(
          fmt::format("unit '{}' has a non-finite outcome", u.unit_id));
    }
    if (u.levels.size() != covariate_names_.size()) {
      throw ValidationError(fmt::format(
          "unit '{}' has {} covariate levels, expected {}", u.unit_id,
          u.levels.size(), covariate_names_.size()));
    }
    if (u.arm == Arm::kTreatment) ++n_treat_;
  }
  if (n_treat_ < 2 || n_control() < 2) {
    throw ValidationError(
        fmt::format("each arm needs at least 2 units (treatment {}, control {})",
                    n_treat_, n_control()));
  }
  std::vector<std::uint32_t> order(units_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return units_[a].unit_id < units_[b].unit_id;
  });
  id_rank_.resize(units_.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r > 0 && units_[order[r]].unit_id == units_[order[r - 1]].unit_id) {
      throw ValidationError(
          fmt::format("duplicate unit_id '{}'", units_[order[r]].unit_id));
    }
    id_rank_[order[r]] = static_cast<std::uint32_t>(r);
  }
}

std::size_t ExperimentDataset::covariate_index(std::string_view name) const {
  const auto it =
      std::find(covariate_names_.begin(), covariate_names_.end(), name);
  if (it == covariate_names_.end()) {
    throw LookupError(fmt::format("unknown breakdown '{}'", name));
  }
  return static_cast<std::size_t>(it - covariate_names_.begin());
}

std::vector<double> ExperimentDataset::outcomes(Arm arm) const {
  std::vector<double> out;
  out.reserve(arm == Arm::kTreatment ? n_treat() : n_control());
  for (const auto& u : units_) {
    if (u.arm == arm) out.push_back(u.outcome);
  }
  return out;
}

ExperimentDataset load_dataset(std::istream& source, const Schema& schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(source, line)) throw SchemaError("input has no header row");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  std::vector<std::string> header =
      split_record(trim(line), schema.delimiter, line_no);
  for (auto& h : header) h = std::string(trim(h));

  if (schema.arm_column.empty()) throw SchemaError("no arm column given");
  if (schema.outcome_column.empty()) throw SchemaError("no outcome column given");
  const std::size_t arm_col = find_column(header, schema.arm_column, "arm");
  const std::size_t outcome_col =
      find_column(header, schema.outcome_column, "outcome");
  const bool has_unit = !schema.unit_column.empty();
  const std::size_t unit_col =
      has_unit ? find_column(header, schema.unit_column, "unit") : 0;
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariate_columns) {
    cov_cols.push_back(find_column(header, c, "covariate"));
  }

  std::vector<UnitRecord> units;
  std::size_t data_row = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++data_row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_record(line, schema.delimiter, line_no);
    if (fields.size() != header.size()) {
      throw RowError(line_no, fmt::format("expected {} fields, found {}",
                                          header.size(), fields.size()));
    }
    UnitRecord u;
    u.unit_id = has_unit ? std::string(trim(fields[unit_col]))
                         : std::to_string(data_row);
    if (u.unit_id.empty()) throw RowError(line_no, "empty unit id");

    const std::string_view arm = trim(fields[arm_col]);
    if (contains(schema.control_values, arm)) {
      u.arm = Arm::kControl;
    } else if (contains(schema.treatment_values, arm)) {
      u.arm = Arm::kTreatment;
    } else {
      throw RowError(line_no,
                     fmt::format("arm value '{}' is neither control nor "
                                 "treatment",
                                 arm));
    }

    const std::string_view text = trim(fields[outcome_col]);
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, u.outcome);
    if (text.empty() || ec != std::errc() || ptr != end ||
        !std::isfinite(u.outcome)) {
      throw RowError(line_no,
                     fmt::format("outcome '{}' is not a finite number", text));
    }

    u.levels.reserve(cov_cols.size());
    for (std::size_t c : cov_cols) {
      const std::string_view level = trim(fields[c]);
      u.levels.emplace_back(level.empty() ? kMissingLevel : level);
    }
    units.push_back(std::move(u));
  }
  return ExperimentDataset(schema.covariate_columns, std::move(units));
}

ExperimentDataset load_dataset(const std::filesystem::path& path,
                               const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(fmt::format("cannot open '{}'", path.string()));
  return load_dataset(in, schema);
}

void write_dataset(std::ostream& out, const ExperimentDataset& ds,
                   char delimiter) {
  out << "unit_id" << delimiter << "arm" << delimiter << "outcome";
  for (const auto& name : ds.covariate_names()) {
    out << delimiter << quote_if_needed(name, delimiter);
  }
  out << '\n';
  for (const auto& u : ds.units()) {
    out << quote_if_needed(u.unit_id, delimiter) << delimiter
        << (u.arm == Arm::kTreatment ? '1' : '0') << delimiter
        << fmt::format("{:.17g}", u.outcome);
    for (const auto& level : u.levels) {
      out << delimiter << quote_if_needed(level, delimiter);
    }
    out << '\n';
  }
}

Schema round_trip_schema(const ExperimentDataset& ds, char delimiter) {
  Schema s;
  s.unit_column = "unit_id";
  s.arm_column = "arm";
  s.outcome_column = "outcome";
  s.covariate_columns = ds.covariate_names();
  s.delimiter = delimiter;
  return s;
}

std::size_t StrataIndex::matchable_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(strata.begin(), strata.end(),
                    [](const Stratum& s) { return s.matchable(); }));
}

std::size_t StrataIndex::excluded_units() const noexcept {
  std::size_t n = 0;
  for (const auto& s : strata) {
    if (!s.matchable()) n += s.size();
  }
  return n;
}

StrataIndex build_strata(const ExperimentDataset& ds,
                         std::string_view breakdown) {
  const std::size_t cov = ds.covariate_index(breakdown);
  std::map<std::string, Stratum> by_level;
  for (std::size_t i = 0; i < ds.n_total(); ++i) {
    const auto& level = ds.level(i, cov);
    auto& stratum = by_level[level];
    if (ds.unit(i).arm == Arm::kTreatment) {
      stratum.treatment.push_back(i);
    } else {
      stratum.control.push_back(i);
    }
  }
  StrataIndex index;
  index.breakdown = std::string(breakdown);
  index.strata.reserve(by_level.size());
  for (auto& [level, stratum] : by_level) {
    stratum.level = level;
    index.strata.push_back(std::move(stratum));
  }
  return index;
}

}  // namespace hte
