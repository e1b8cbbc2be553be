/*
 * Copyright 2026 The multien Authors.
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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace multien {

using Json = nlohmann::ordered_json;

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerHour = 3600;

// Accepts "YYYY-MM-DD[T ]HH:MM[:SS][Z]", "YYYY-MM-DD" or plain epoch seconds.
std::optional<Timestamp> parse_timestamp(std::string_view text);
// ISO-8601 with a trailing 'Z'.
std::string format_timestamp(Timestamp ts);

class SourceId {
 public:
  SourceId() = default;
  explicit SourceId(std::string name);

  const std::string& str() const noexcept { return name_; }

  friend auto operator<=>(const SourceId&, const SourceId&) = default;

 private:
  std::string name_;
};

std::vector<SourceId> to_source_ids(const std::vector<std::string>& names);
std::vector<std::string> to_names(const std::vector<SourceId>& ids);

// Half-open row range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

// Aligned multi-source consumption on a regular grid. Column-major storage;
// a NaN value is a cell that is currently missing. `missing_mask` keeps the
// provenance of cells that were missing in the raw input even after they are
// filled, and `partial_mask` flags aggregated cells built from an incomplete
// set of constituents.
class TimeSeriesTable {
 public:
  TimeSeriesTable() = default;
  TimeSeriesTable(Timestamp start, std::int64_t interval,
                  std::vector<SourceId> sources,
                  std::vector<std::vector<double>> columns,
                  std::vector<std::string> units = {});

  std::size_t rows() const { return rows_; }
  std::size_t width() const { return sources_.size(); }
  Timestamp start() const { return start_; }
  std::int64_t interval() const { return interval_; }
  Timestamp timestamp(std::size_t row) const {
    return start_ + static_cast<std::int64_t>(row) * interval_;
  }

  const std::vector<SourceId>& sources() const { return sources_; }
  const std::vector<std::string>& units() const { return units_; }
  std::optional<std::size_t> index_of(const SourceId& id) const;
  // Throws PlanMismatch when the source is absent.
  std::size_t require_index(const SourceId& id) const;

  std::span<const double> column(std::size_t i) const { return columns_[i]; }
  std::span<const double> column(const SourceId& id) const {
    return columns_[require_index(id)];
  }
  double value(std::size_t row, std::size_t col) const {
    return columns_[col][row];
  }

  const std::vector<bool>& missing_mask(std::size_t col) const {
    return missing_[col];
  }
  const std::vector<bool>& partial_mask(std::size_t col) const {
    return partial_[col];
  }
  std::size_t missing_count() const;
  bool has_missing() const { return missing_count() > 0; }

  void set_missing_mask(std::vector<std::vector<bool>> mask);
  void set_partial_mask(std::vector<std::vector<bool>> mask);

  // Row view on a subset of sources, in the given order.
  TimeSeriesTable select(const std::vector<SourceId>& ids) const;
  TimeSeriesTable rows_between(IndexRange range) const;

 private:
  Timestamp start_ = 0;
  std::int64_t interval_ = kSecondsPerHour;
  std::size_t rows_ = 0;
  std::vector<SourceId> sources_;
  std::vector<std::string> units_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::vector<bool>> missing_;
  std::vector<std::vector<bool>> partial_;
};

struct SourceScale {
  SourceId source;
  double min = 0.0;
  double max = 0.0;
};

struct ScalingParams {
  std::vector<SourceScale> scales;
  const SourceScale* find(const SourceId& id) const;
};

inline constexpr double kScaledLowerClamp = -0.5;
inline constexpr double kScaledUpperClamp = 1.5;

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  // (csv column, source name) pairs. Empty means every non-timestamp column
  // under its own name.
  std::vector<std::pair<std::string, std::string>> columns;
  // Unit label per source name; absent sources get "".
  std::vector<std::pair<std::string, std::string>> units;
};

TimeSeriesTable ingest_csv(const std::filesystem::path& path,
                           const CsvSchema& schema = {});
TimeSeriesTable parse_csv(std::istream& in, const CsvSchema& schema = {});

TimeSeriesTable resample_hourly(const TimeSeriesTable& table);
TimeSeriesTable interpolate_missing(const TimeSeriesTable& table);
// Interpolation first, then hourly aggregation.
TimeSeriesTable preprocess(const TimeSeriesTable& table);

ScalingParams fit_minmax(const TimeSeriesTable& table, IndexRange fit_range);
TimeSeriesTable apply_minmax(const TimeSeriesTable& table,
                             const ScalingParams& params);
TimeSeriesTable slice_by_date(const TimeSeriesTable& table, Timestamp from,
                              Timestamp to);

// Table CSV (`timestamp,<src>...`) plus a JSON sidecar with interval, units
// and optionally scaling parameters.
void write_table_csv(std::ostream& out, const TimeSeriesTable& table);
void save_table(const std::filesystem::path& csv_path,
                const TimeSeriesTable& table,
                const ScalingParams* scaling = nullptr);
// Reads a table written by save_table; the sidecar is used when present.
TimeSeriesTable load_table(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

Json scaling_to_json(const ScalingParams& params);
ScalingParams scaling_from_json(const Json& j);

// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace multien

template <>
struct std::hash<multien::SourceId> {
  std::size_t operator()(const multien::SourceId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
