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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "multien/error.hpp"
#include "multien/timeseries.hpp"
#include "support.hpp"

using namespace multien;
using multien::test::make_table;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

TimeSeriesTable parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

using multien::test::error_code;

}  // namespace

TEST_SUITE("timeseries") {

TEST_CASE("timestamps parse and format") {
  CHECK(parse_timestamp("2020-01-01T00:00:00Z") == 1577836800);
  CHECK(parse_timestamp("2020-01-01 01:00") == 1577840400);
  CHECK(parse_timestamp("2020-01-02") == 1577923200);
  CHECK(parse_timestamp("1577836800") == 1577836800);
  CHECK_FALSE(parse_timestamp("yesterday").has_value());
  CHECK(format_timestamp(1577836800) == "2020-01-01T00:00:00Z");
}

TEST_CASE("csv with one empty cell marks exactly one missing") {
  const auto t = parse(
      "timestamp,power,water\n"
      "2020-01-01T00:00:00Z,1.0,2.0\n"
      "2020-01-01T01:00:00Z,1.5,\n"
      "2020-01-01T02:00:00Z,2.0,3.0\n");
  CHECK(t.rows() == 3);
  CHECK(t.width() == 2);
  CHECK(t.missing_count() == 1);
  CHECK(t.missing_mask(1)[1]);
  CHECK(std::isnan(t.value(1, 1)));
}

TEST_CASE("csv errors") {
  CHECK(error_code([] {
          parse("timestamp,a\n2020-01-01T00:00Z,1\n2020-01-01T00:00Z,2\n");
        }) == ErrorCode::kDuplicateTimestamp);
  CHECK(error_code([] {
          parse("timestamp,a\n2020-01-01T02:00Z,1\n2020-01-01T01:00Z,2\n");
        }) == ErrorCode::kNonMonotonicTimestamps);
  CHECK(error_code([] { parse("timestamp,a\n2020-01-01T00:00Z,x\n2020-01-01T01:00Z,2\n"); }) ==
        ErrorCode::kParseError);
  CHECK(error_code([] { parse("time,a\n2020-01-01T00:00Z,1\n"); }) == ErrorCode::kParseError);
}

TEST_CASE("schema renames and selects columns") {
  CsvSchema schema;
  schema.timestamp_column = "ts";
  schema.columns = {{"W", "water"}};
  schema.units = {{"water", "L"}};
  const auto t = parse("ts,P,W\n0,1,5\n3600,2,6\n", schema);
  REQUIRE(t.width() == 1);
  CHECK(t.sources()[0].str() == "water");
  CHECK(t.units()[0] == "L");
  CHECK(t.value(1, 0) == 6.0);
}

TEST_CASE("timestamp gaps become missing rows") {
  const auto t = parse("timestamp,a\n0,1\n3600,2\n10800,4\n");
  CHECK(t.rows() == 4);
  CHECK(t.missing_mask(0)[2]);
}

TEST_CASE("minute data sums to hourly") {
  std::vector<double> ones(60, 1.0);
  TimeSeriesTable t(0, 60, to_source_ids({"a"}), {ones});
  const auto h = resample_hourly(t);
  REQUIRE(h.rows() == 1);
  CHECK(h.value(0, 0) == 60.0);
  CHECK(h.interval() == kSecondsPerHour);
}

TEST_CASE("partially missing hour sums present cells and is flagged") {
  TimeSeriesTable t(0, 900, to_source_ids({"a"}), {{1.0, 2.0, kNaN, 3.0}});
  std::vector<std::vector<bool>> miss{{false, false, true, false}};
  t.set_missing_mask(miss);
  const auto h = resample_hourly(t);
  REQUIRE(h.rows() == 1);
  CHECK(h.value(0, 0) == 6.0);
  CHECK(h.partial_mask(0)[0]);
  CHECK_FALSE(h.missing_mask(0)[0]);
}

TEST_CASE("hour with every cell missing stays missing") {
  TimeSeriesTable t(0, 1800, to_source_ids({"a"}), {{1.0, 2.0, kNaN, kNaN}});
  t.set_missing_mask({{false, false, true, true}});
  const auto h = resample_hourly(t);
  CHECK(h.missing_mask(0)[1]);
  CHECK(std::isnan(h.value(1, 0)));
}

TEST_CASE("hourly table resamples to itself") {
  const auto t = make_table({"a", "b"}, {{1, 2, 3}, {4, 5, 6}});
  const auto h = resample_hourly(t);
  CHECK(h.rows() == 3);
  for (std::size_t r = 0; r < 3; ++r) CHECK(h.value(r, 1) == t.value(r, 1));
}

TEST_CASE("incompatible interval") {
  TimeSeriesTable t(0, 7 * 60, to_source_ids({"a"}), {{1.0, 2.0}});
  CHECK(error_code([&] { resample_hourly(t); }) == ErrorCode::kIncompatibleInterval);
}

TEST_CASE("resampling preserves totals over full hours") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> col(600);
  double total = 0.0;
  for (auto& v : col) total += (v = u(rng));
  TimeSeriesTable t(0, 360, to_source_ids({"a"}), {col});
  const auto h = resample_hourly(t);
  double after = 0.0;
  for (std::size_t r = 0; r < h.rows(); ++r) after += h.value(r, 0);
  CHECK(multien::test::rel_close(total, after, 1e-9));
}

TEST_CASE("linear interpolation") {
  auto t = make_table({"a", "b", "c"},
                      {{2, kNaN, 4, 1, 1}, {kNaN, 5, kNaN, 5, 5}, {0, kNaN, kNaN, kNaN, 8}});
  const auto f = interpolate_missing(t);
  CHECK(f.value(1, 0) == 3.0);
  for (std::size_t r = 0; r < 5; ++r) CHECK(f.value(r, 1) == 5.0);
  const double want[] = {0, 2, 4, 6, 8};
  for (std::size_t r = 0; r < 5; ++r) CHECK(f.value(r, 2) == doctest::Approx(want[r]));
  CHECK_FALSE(f.has_missing());
}

TEST_CASE("interpolation is idempotent and keeps present values") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> col(200);
  for (auto& v : col) v = u(rng) < 0.2 ? kNaN : u(rng);
  col[0] = 0.5;
  const auto t = make_table({"a"}, {col});
  const auto once = interpolate_missing(t);
  const auto twice = interpolate_missing(once);
  for (std::size_t r = 0; r < col.size(); ++r) {
    if (!std::isnan(col[r])) CHECK(once.value(r, 0) == col[r]);
    CHECK(twice.value(r, 0) == once.value(r, 0));
  }
}

TEST_CASE("all-missing column") {
  const auto t = make_table({"a", "b"}, {{1, 2}, {kNaN, kNaN}});
  CHECK(error_code([&] { interpolate_missing(t); }) == ErrorCode::kAllMissingColumn);
}

TEST_CASE("min-max fit and apply") {
  const auto t = make_table({"a", "b"}, {{0, 5, 10, 12, 30}, {3, 3, 3, 3, 3}});
  const auto full = fit_minmax(t, {0, 3});
  CHECK(full.scales[0].min == 0.0);
  CHECK(full.scales[0].max == 10.0);
  CHECK(full.scales[1].min == 3.0);
  CHECK(full.scales[1].max == 3.0);
  const auto s = apply_minmax(t, full);
  CHECK(s.value(1, 0) == 0.5);
  CHECK(s.value(2, 0) == 1.0);
  CHECK(s.value(3, 0) == doctest::Approx(1.2));
  CHECK(s.value(4, 0) == kScaledUpperClamp);
  for (std::size_t r = 0; r < 5; ++r) CHECK(s.value(r, 1) == 0.0);
  CHECK(error_code([&] { fit_minmax(t, {2, 2}); }) == ErrorCode::kEmptyRange);
}

TEST_CASE("fit range ignores the tail") {
  std::mt19937_64 rng(2);
  auto col = multien::test::gaussian(100, rng);
  col[90] = 100.0;
  const auto t = make_table({"a"}, {col});
  const auto p = fit_minmax(t, {0, 70});
  const auto [lo, hi] = std::minmax_element(col.begin(), col.begin() + 70);
  CHECK(p.scales[0].min == *lo);
  CHECK(p.scales[0].max == *hi);
}

TEST_CASE("min-max inverse recovers originals") {
  std::mt19937_64 rng(3);
  auto col = multien::test::gaussian(300, rng, 10.0, 2.0);
  const auto t = make_table({"a"}, {col});
  const auto p = fit_minmax(t, {0, t.rows()});
  const auto s = apply_minmax(t, p);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double back = s.value(r, 0) * (p.scales[0].max - p.scales[0].min) + p.scales[0].min;
    CHECK(multien::test::rel_close(back, col[r], 1e-12));
  }
}

TEST_CASE("missing scaling params") {
  const auto t = make_table({"a", "b"}, {{0, 1}, {0, 1}});
  ScalingParams p;
  p.scales.push_back({SourceId("a"), 0.0, 1.0});
  CHECK(error_code([&] { apply_minmax(t, p); }) == ErrorCode::kMissingSourceParams);
}

TEST_CASE("slice by date") {
  const Timestamp start = *parse_timestamp("2021-01-01T00:00:00Z");
  std::vector<double> col(365 * 24, 1.0);
  const auto t = make_table({"a"}, {col}, start);
  const auto same = slice_by_date(t, t.start(), t.timestamp(t.rows() - 1) + 1);
  CHECK(same.rows() == t.rows());
  CHECK(same.start() == t.start());
  const auto winter = slice_by_date(t, *parse_timestamp("2021-12-01"), *parse_timestamp("2022-03-01"));
  CHECK(winter.rows() == 31 * 24);  // table ends on Dec 31
  const auto jf = slice_by_date(t, start, *parse_timestamp("2021-03-01"));
  CHECK(jf.rows() == (31 + 28) * 24);
  CHECK(error_code([&] { slice_by_date(t, start - 100000, start - 50000); }) ==
        ErrorCode::kEmptySlice);
}

TEST_CASE("table csv round trip keeps values and sidecar metadata") {
  const auto dir = multien::test::scratch_dir("ts_roundtrip");
  TimeSeriesTable t(1577836800, kSecondsPerHour, to_source_ids({"power", "gas"}),
                    {{0.1, 1.0 / 3.0, 2.5}, {7.0, 8.0, 1e-7}}, {"kWh", "m3"});
  ScalingParams p = fit_minmax(t, {0, 3});
  save_table(dir / "t.csv", t, &p);
  const auto back = load_table(dir / "t.csv");
  REQUIRE(back.rows() == 3);
  CHECK(back.units()[1] == "m3");
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t r = 0; r < 3; ++r) CHECK(back.value(r, c) == t.value(r, c));
  }
  CHECK(std::filesystem::exists(sidecar_path(dir / "t.csv")));
}

}  // TEST_SUITE
