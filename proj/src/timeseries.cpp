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

#include "multien/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "multien/error.hpp"

namespace multien {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m,
                     unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '"' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(pos)));
      break;
    }
    fields.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return fields;
}

std::string position(std::size_t line, std::size_t col) {
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::vector<std::vector<bool>> empty_masks(std::size_t width,
                                           std::size_t rows) {
  return std::vector<std::vector<bool>>(width, std::vector<bool>(rows, false));
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (std::all_of(text.begin(), text.end(),
                  [](char c) { return (c >= '0' && c <= '9') || c == '-'; }) &&
      text.find('-', 1) == std::string_view::npos) {
    std::int64_t epoch = 0;
    auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), epoch);
    if (ec == std::errc() && ptr == text.data() + text.size()) return epoch;
    return std::nullopt;
  }
  if (text.back() == 'Z') text.remove_suffix(1);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  unsigned year = 0, month = 0, day = 0;
  if (!parse_uint(text.substr(0, 4), year) ||
      !parse_uint(text.substr(5, 2), month) ||
      !parse_uint(text.substr(8, 2), day)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
  unsigned hour = 0, minute = 0, second = 0;
  if (text.size() > 10) {
    if ((text[10] != 'T' && text[10] != ' ') || text.size() < 16 ||
        text[13] != ':') {
      return std::nullopt;
    }
    if (!parse_uint(text.substr(11, 2), hour) ||
        !parse_uint(text.substr(14, 2), minute)) {
      return std::nullopt;
    }
    if (text.size() > 16) {
      if (text.size() != 19 || text[16] != ':' ||
          !parse_uint(text.substr(17, 2), second)) {
        return std::nullopt;
      }
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
  }
  const std::int64_t days = days_from_civil(year, month, day);
  return days * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(Timestamp ts) {
  const std::int64_t days = floor_div(ts, 86400);
  const std::int64_t secs = ts - days * 86400;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d,
                static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

SourceId::SourceId(std::string name) : name_(std::move(name)) {
  if (name_.empty()) {
    throw Error(ErrorCode::kInvalidSpec, "source id must be non-empty");
  }
}

std::vector<SourceId> to_source_ids(const std::vector<std::string>& names) {
  std::vector<SourceId> ids;
  ids.reserve(names.size());
  for (const auto& n : names) ids.emplace_back(n);
  return ids;
}

std::vector<std::string> to_names(const std::vector<SourceId>& ids) {
  std::vector<std::string> names;
  names.reserve(ids.size());
  for (const auto& id : ids) names.push_back(id.str());
  return names;
}

TimeSeriesTable::TimeSeriesTable(Timestamp start, std::int64_t interval,
                                 std::vector<SourceId> sources,
                                 std::vector<std::vector<double>> columns,
                                 std::vector<std::string> units)
    : start_(start),
      interval_(interval),
      sources_(std::move(sources)),
      units_(std::move(units)),
      columns_(std::move(columns)) {
  if (interval_ <= 0) {
    throw Error(ErrorCode::kInvalidSpec, "interval must be positive");
  }
  if (columns_.size() != sources_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "column count does not match source count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& s : sources_) {
    if (!seen.insert(s.str()).second) {
      throw Error(ErrorCode::kInvalidSpec, "duplicate source '" + s.str() + "'");
    }
  }
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (const auto& c : columns_) {
    if (c.size() != rows_) {
      throw Error(ErrorCode::kShapeMismatch, "columns differ in length");
    }
  }
  if (units_.empty()) units_.assign(sources_.size(), "");
  if (units_.size() != sources_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "unit count does not match sources");
  }
  missing_ = empty_masks(width(), rows_);
  partial_ = empty_masks(width(), rows_);
  for (std::size_t c = 0; c < width(); ++c) {
    for (std::size_t r = 0; r < rows_; ++r) {
      if (std::isnan(columns_[c][r])) missing_[c][r] = true;
    }
  }
}

std::optional<std::size_t> TimeSeriesTable::index_of(const SourceId& id) const {
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (sources_[i] == id) return i;
  }
  return std::nullopt;
}

std::size_t TimeSeriesTable::require_index(const SourceId& id) const {
  auto idx = index_of(id);
  if (!idx) {
    throw Error(ErrorCode::kPlanMismatch,
                "source '" + id.str() + "' not present in table");
  }
  return *idx;
}

std::size_t TimeSeriesTable::missing_count() const {
  std::size_t n = 0;
  for (const auto& c : columns_) {
    n += static_cast<std::size_t>(
        std::count_if(c.begin(), c.end(), [](double v) { return std::isnan(v); }));
  }
  return n;
}

void TimeSeriesTable::set_missing_mask(std::vector<std::vector<bool>> mask) {
  if (mask.size() != width()) {
    throw Error(ErrorCode::kShapeMismatch, "missing mask width mismatch");
  }
  for (const auto& m : mask) {
    if (m.size() != rows_) {
      throw Error(ErrorCode::kShapeMismatch, "missing mask length mismatch");
    }
  }
  missing_ = std::move(mask);
}

void TimeSeriesTable::set_partial_mask(std::vector<std::vector<bool>> mask) {
  if (mask.size() != width()) {
    throw Error(ErrorCode::kShapeMismatch, "partial mask width mismatch");
  }
  for (const auto& m : mask) {
    if (m.size() != rows_) {
      throw Error(ErrorCode::kShapeMismatch, "partial mask length mismatch");
    }
  }
  partial_ = std::move(mask);
}

TimeSeriesTable TimeSeriesTable::select(const std::vector<SourceId>& ids) const {
  std::vector<std::vector<double>> cols;
  std::vector<std::string> units;
  std::vector<std::vector<bool>> missing, partial;
  for (const auto& id : ids) {
    const std::size_t i = require_index(id);
    cols.push_back(columns_[i]);
    units.push_back(units_[i]);
    missing.push_back(missing_[i]);
    partial.push_back(partial_[i]);
  }
  TimeSeriesTable out(start_, interval_, ids, std::move(cols), std::move(units));
  out.set_missing_mask(std::move(missing));
  out.set_partial_mask(std::move(partial));
  return out;
}

TimeSeriesTable TimeSeriesTable::rows_between(IndexRange range) const {
  if (range.end > rows_ || range.begin >= range.end) {
    throw Error(ErrorCode::kEmptyRange, "row range out of bounds or empty");
  }
  std::vector<std::vector<double>> cols;
  std::vector<std::vector<bool>> missing, partial;
  const auto b = static_cast<std::ptrdiff_t>(range.begin);
  const auto e = static_cast<std::ptrdiff_t>(range.end);
  for (std::size_t c = 0; c < width(); ++c) {
    cols.emplace_back(columns_[c].begin() + b, columns_[c].begin() + e);
    missing.emplace_back(missing_[c].begin() + b, missing_[c].begin() + e);
    partial.emplace_back(partial_[c].begin() + b, partial_[c].begin() + e);
  }
  TimeSeriesTable out(timestamp(range.begin), interval_, sources_,
                      std::move(cols), units_);
  out.set_missing_mask(std::move(missing));
  out.set_partial_mask(std::move(partial));
  return out;
}

const SourceScale* ScalingParams::find(const SourceId& id) const {
  for (const auto& s : scales) {
    if (s.source == id) return &s;
  }
  return nullptr;
}

TimeSeriesTable parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, "empty CSV (no header row)");
  }
  const auto header = split_fields(line);
  std::optional<std::size_t> ts_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.timestamp_column) ts_col = i;
  }
  if (!ts_col) {
    throw Error(ErrorCode::kParseError,
                "header lacks timestamp column '" + schema.timestamp_column + "'");
  }
  std::vector<std::size_t> csv_cols;
  std::vector<SourceId> sources;
  if (schema.columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == *ts_col) continue;
      csv_cols.push_back(i);
      sources.emplace_back(std::string(header[i]));
    }
  } else {
    for (const auto& [csv_name, source_name] : schema.columns) {
      auto it = std::find(header.begin(), header.end(), csv_name);
      if (it == header.end()) {
        throw Error(ErrorCode::kParseError,
                    "header lacks declared column '" + csv_name + "'");
      }
      csv_cols.push_back(static_cast<std::size_t>(it - header.begin()));
      sources.emplace_back(source_name);
    }
  }

  std::vector<Timestamp> stamps;
  std::vector<std::vector<double>> raw(sources.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kParseError,
                  position(line_no, fields.size()) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    auto ts = parse_timestamp(fields[*ts_col]);
    if (!ts) {
      throw Error(ErrorCode::kParseError,
                  position(line_no, *ts_col + 1) + ": bad timestamp '" +
                      std::string(fields[*ts_col]) + "'");
    }
    stamps.push_back(*ts);
    for (std::size_t k = 0; k < csv_cols.size(); ++k) {
      const std::string_view f = fields[csv_cols[k]];
      if (f.empty() || f == "NaN" || f == "nan" || f == "NA") {
        raw[k].push_back(kNaN);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::kParseError,
                    position(line_no, csv_cols[k] + 1) + ": bad number '" +
                        std::string(f) + "'");
      }
      if (v < 0.0) {
        throw Error(ErrorCode::kParseError,
                    position(line_no, csv_cols[k] + 1) +
                        ": negative consumption");
      }
      raw[k].push_back(v);
    }
  }
  if (stamps.size() < 2) {
    throw Error(ErrorCode::kTooShort, "CSV must contain at least two rows");
  }

  std::unordered_set<Timestamp> seen;
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    if (!seen.insert(stamps[i]).second) {
      throw Error(ErrorCode::kDuplicateTimestamp,
                  "duplicate timestamp " + format_timestamp(stamps[i]) +
                      " at data row " + std::to_string(i + 1));
    }
  }
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i] <= stamps[i - 1]) {
      throw Error(ErrorCode::kNonMonotonicTimestamps,
                  "timestamps decrease at data row " + std::to_string(i + 1));
    }
  }
  std::int64_t interval = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    interval = std::min(interval, stamps[i] - stamps[i - 1]);
  }
  // Gaps that are whole multiples of the interval become missing rows.
  const std::size_t rows =
      static_cast<std::size_t>((stamps.back() - stamps.front()) / interval) + 1;
  std::vector<std::vector<double>> cols(sources.size(),
                                        std::vector<double>(rows, kNaN));
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    const std::int64_t offset = stamps[i] - stamps.front();
    if (offset % interval != 0) {
      throw Error(ErrorCode::kParseError,
                  "irregular timestamp grid at data row " + std::to_string(i + 1));
    }
    const auto r = static_cast<std::size_t>(offset / interval);
    for (std::size_t k = 0; k < sources.size(); ++k) cols[k][r] = raw[k][i];
  }
  std::vector<std::string> units(sources.size());
  for (const auto& [name, unit] : schema.units) {
    for (std::size_t k = 0; k < sources.size(); ++k) {
      if (sources[k].str() == name) units[k] = unit;
    }
  }
  return TimeSeriesTable(stamps.front(), interval, std::move(sources),
                         std::move(cols), std::move(units));
}

TimeSeriesTable ingest_csv(const std::filesystem::path& path,
                           const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  }
  return parse_csv(in, schema);
}

TimeSeriesTable resample_hourly(const TimeSeriesTable& table) {
  const std::int64_t interval = table.interval();
  const std::size_t n = table.width();
  if (interval == kSecondsPerHour) return table;

  if (interval > kSecondsPerHour) {
    if (interval % kSecondsPerHour != 0) {
      throw Error(ErrorCode::kIncompatibleInterval,
                  "interval " + std::to_string(interval) +
                      "s does not tile hours");
    }
    // Coarser than hourly: spread each value evenly over its hours.
    const auto k = static_cast<std::size_t>(interval / kSecondsPerHour);
    std::vector<std::vector<double>> cols(n);
    auto missing = empty_masks(n, table.rows() * k);
    auto partial = empty_masks(n, table.rows() * k);
    for (std::size_t c = 0; c < n; ++c) {
      cols[c].reserve(table.rows() * k);
      for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          cols[c].push_back(table.value(r, c) / static_cast<double>(k));
          missing[c][r * k + j] = table.missing_mask(c)[r];
          partial[c][r * k + j] = table.partial_mask(c)[r];
        }
      }
    }
    TimeSeriesTable out(table.start(), kSecondsPerHour, table.sources(),
                        std::move(cols), table.units());
    out.set_missing_mask(std::move(missing));
    out.set_partial_mask(std::move(partial));
    return out;
  }

  if (kSecondsPerHour % interval != 0) {
    throw Error(ErrorCode::kIncompatibleInterval,
                "interval " + std::to_string(interval) + "s does not tile hours");
  }
  const auto per_hour = static_cast<std::size_t>(kSecondsPerHour / interval);
  const std::int64_t first_hour = floor_div(table.start(), kSecondsPerHour);
  const std::int64_t last_hour =
      floor_div(table.timestamp(table.rows() - 1), kSecondsPerHour);
  const auto hours = static_cast<std::size_t>(last_hour - first_hour + 1);

  std::vector<std::vector<double>> sums(n, std::vector<double>(hours, 0.0));
  std::vector<std::vector<std::size_t>> present(
      n, std::vector<std::size_t>(hours, 0));
  std::vector<std::vector<std::size_t>> original(
      n, std::vector<std::size_t>(hours, 0));
  std::vector<std::size_t> members(hours, 0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto h = static_cast<std::size_t>(
        floor_div(table.timestamp(r), kSecondsPerHour) - first_hour);
    ++members[h];
    for (std::size_t c = 0; c < n; ++c) {
      const double v = table.value(r, c);
      if (!std::isnan(v)) {
        sums[c][h] += v;
        ++present[c][h];
      }
      if (table.missing_mask(c)[r]) ++original[c][h];
    }
  }
  auto missing = empty_masks(n, hours);
  auto partial = empty_masks(n, hours);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t h = 0; h < hours; ++h) {
      if (present[c][h] == 0) {
        sums[c][h] = kNaN;
        missing[c][h] = true;
        continue;
      }
      if (original[c][h] == per_hour) missing[c][h] = true;
      if (present[c][h] < per_hour || (original[c][h] > 0 &&
                                       original[c][h] < per_hour) ||
          members[h] < per_hour) {
        partial[c][h] = true;
      }
    }
  }
  TimeSeriesTable out(first_hour * kSecondsPerHour, kSecondsPerHour,
                      table.sources(), std::move(sums), table.units());
  out.set_missing_mask(std::move(missing));
  out.set_partial_mask(std::move(partial));
  return out;
}

TimeSeriesTable interpolate_missing(const TimeSeriesTable& table) {
  std::vector<std::vector<double>> cols;
  cols.reserve(table.width());
  for (std::size_t c = 0; c < table.width(); ++c) {
    auto col = table.column(c);
    std::vector<double> out(col.begin(), col.end());
    std::vector<std::size_t> present;
    for (std::size_t r = 0; r < out.size(); ++r) {
      if (!std::isnan(out[r])) present.push_back(r);
    }
    if (present.empty()) {
      throw Error(ErrorCode::kAllMissingColumn,
                  "column '" + table.sources()[c].str() + "' has no values");
    }
    for (std::size_t r = 0; r < present.front(); ++r) out[r] = out[present.front()];
    for (std::size_t r = present.back() + 1; r < out.size(); ++r) {
      out[r] = out[present.back()];
    }
    for (std::size_t k = 1; k < present.size(); ++k) {
      const std::size_t i = present[k - 1];
      const std::size_t j = present[k];
      if (j == i + 1) continue;
      const double a = out[i];
      const double b = out[j];
      const auto span = static_cast<double>(j - i);
      for (std::size_t r = i + 1; r < j; ++r) {
        out[r] = a + (b - a) * static_cast<double>(r - i) / span;
      }
    }
    cols.push_back(std::move(out));
  }
  TimeSeriesTable out(table.start(), table.interval(), table.sources(),
                      std::move(cols), table.units());
  std::vector<std::vector<bool>> missing, partial;
  for (std::size_t c = 0; c < table.width(); ++c) {
    missing.push_back(table.missing_mask(c));
    partial.push_back(table.partial_mask(c));
  }
  out.set_missing_mask(std::move(missing));
  out.set_partial_mask(std::move(partial));
  return out;
}

TimeSeriesTable preprocess(const TimeSeriesTable& table) {
  if (table.interval() < kSecondsPerHour) {
    return resample_hourly(interpolate_missing(table));
  }
  return interpolate_missing(resample_hourly(table));
}

ScalingParams fit_minmax(const TimeSeriesTable& table, IndexRange fit_range) {
  if (fit_range.size() == 0 || fit_range.end > table.rows()) {
    throw Error(ErrorCode::kEmptyRange, "min-max fit range is empty");
  }
  ScalingParams params;
  for (std::size_t c = 0; c < table.width(); ++c) {
    auto col = table.column(c);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r = fit_range.begin; r < fit_range.end; ++r) {
      if (std::isnan(col[r])) continue;
      lo = std::min(lo, col[r]);
      hi = std::max(hi, col[r]);
    }
    if (lo > hi) {
      throw Error(ErrorCode::kEmptyRange, "no present values for '" +
                                              table.sources()[c].str() +
                                              "' in fit range");
    }
    params.scales.push_back({table.sources()[c], lo, hi});
  }
  return params;
}

TimeSeriesTable apply_minmax(const TimeSeriesTable& table,
                             const ScalingParams& params) {
  std::vector<std::vector<double>> cols;
  for (std::size_t c = 0; c < table.width(); ++c) {
    const SourceScale* s = params.find(table.sources()[c]);
    if (s == nullptr) {
      throw Error(ErrorCode::kMissingSourceParams,
                  "no scaling parameters for '" + table.sources()[c].str() + "'");
    }
    const double range = s->max - s->min;
    auto col = table.column(c);
    std::vector<double> out(col.size());
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (std::isnan(col[r])) {
        out[r] = col[r];
      } else if (range <= 0.0) {
        out[r] = 0.0;
      } else {
        out[r] = std::clamp((col[r] - s->min) / range, kScaledLowerClamp,
                            kScaledUpperClamp);
      }
    }
    cols.push_back(std::move(out));
  }
  TimeSeriesTable out(table.start(), table.interval(), table.sources(),
                      std::move(cols), table.units());
  std::vector<std::vector<bool>> missing, partial;
  for (std::size_t c = 0; c < table.width(); ++c) {
    missing.push_back(table.missing_mask(c));
    partial.push_back(table.partial_mask(c));
  }
  out.set_missing_mask(std::move(missing));
  out.set_partial_mask(std::move(partial));
  return out;
}

TimeSeriesTable slice_by_date(const TimeSeriesTable& table, Timestamp from,
                              Timestamp to) {
  if (from >= to) {
    throw Error(ErrorCode::kEmptySlice, "slice requires from < to");
  }
  std::size_t begin = table.rows();
  std::size_t end = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const Timestamp ts = table.timestamp(r);
    if (ts >= from && ts < to) {
      begin = std::min(begin, r);
      end = r + 1;
    }
  }
  if (begin >= end) {
    throw Error(ErrorCode::kEmptySlice, "slice does not overlap the table");
  }
  return table.rows_between({begin, end});
}

void write_table_csv(std::ostream& out, const TimeSeriesTable& table) {
  out << "timestamp";
  for (const auto& s : table.sources()) out << ',' << s.str();
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << format_timestamp(table.timestamp(r));
    for (std::size_t c = 0; c < table.width(); ++c) {
      out << ',' << format_double(table.value(r, c));
    }
    out << '\n';
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

Json scaling_to_json(const ScalingParams& params) {
  Json j = Json::array();
  for (const auto& s : params.scales) {
    j.push_back({{"source", s.source.str()}, {"min", s.min}, {"max", s.max}});
  }
  return j;
}

ScalingParams scaling_from_json(const Json& j) {
  ScalingParams params;
  try {
    for (const auto& e : j) {
      params.scales.push_back({SourceId(e.at("source").get<std::string>()),
                               e.at("min").get<double>(),
                               e.at("max").get<double>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError,
                std::string("bad scaling parameters: ") + ex.what());
  }
  return params;
}

void save_table(const std::filesystem::path& csv_path,
                const TimeSeriesTable& table, const ScalingParams* scaling) {
  {
    std::ofstream out(csv_path);
    if (!out) {
      throw Error(ErrorCode::kIo, "cannot write '" + csv_path.string() + "'");
    }
    write_table_csv(out, table);
  }
  Json meta;
  meta["format"] = "multien-table";
  meta["version"] = 1;
  meta["start"] = format_timestamp(table.start());
  meta["interval"] = table.interval();
  meta["rows"] = table.rows();
  Json units = Json::object();
  for (std::size_t c = 0; c < table.width(); ++c) {
    units[table.sources()[c].str()] = table.units()[c];
  }
  meta["units"] = units;
  std::size_t imputed = 0;
  for (std::size_t c = 0; c < table.width(); ++c) {
    imputed += static_cast<std::size_t>(std::count(
        table.missing_mask(c).begin(), table.missing_mask(c).end(), true));
  }
  meta["imputed_cells"] = imputed;
  if (scaling != nullptr) meta["scaling"] = scaling_to_json(*scaling);
  std::ofstream out(sidecar_path(csv_path));
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write sidecar for '" +
                                    csv_path.string() + "'");
  }
  out << meta.dump(2) << '\n';
}

TimeSeriesTable load_table(const std::filesystem::path& csv_path) {
  TimeSeriesTable table = ingest_csv(csv_path);
  const auto meta_path = sidecar_path(csv_path);
  if (!std::filesystem::exists(meta_path)) return table;
  std::ifstream in(meta_path);
  Json meta;
  try {
    meta = Json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError,
                "bad sidecar '" + meta_path.string() + "': " + ex.what());
  }
  std::vector<std::vector<double>> cols;
  std::vector<std::string> units;
  for (std::size_t c = 0; c < table.width(); ++c) {
    auto col = table.column(c);
    cols.emplace_back(col.begin(), col.end());
    const auto& name = table.sources()[c].str();
    units.push_back(meta.contains("units") && meta["units"].contains(name)
                        ? meta["units"][name].get<std::string>()
                        : "");
  }
  return TimeSeriesTable(table.start(), table.interval(), table.sources(),
                         std::move(cols), std::move(units));
}

}  // namespace multien
