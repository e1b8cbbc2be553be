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

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "multien/stats.hpp"
#include "multien/timeseries.hpp"

namespace multien {

enum class IndividualRule {
  kZScore3,  // x > mean + 3 * std
  kMean3x,   // x > 3 * mean
};

std::string_view to_string(IndividualRule rule);
IndividualRule individual_rule_from_string(std::string_view name);

enum class WindowRule {
  kLast,  // label of the window's final timestamp
  kAny,   // any labeled timestamp inside the window
};

std::string_view to_string(WindowRule rule);
WindowRule window_rule_from_string(std::string_view name);

struct LabelingOptions {
  IndividualRule rule = IndividualRule::kZScore3;
  // zscore3 only: flag |x - mean| > 3 std instead of the upper tail.
  bool two_sided = false;
};

// A_{predictor,response}: influential points of the regression of `response`
// on `predictor`.
struct PairLabels {
  SourceId predictor;
  SourceId response;
  std::vector<bool> flags;
};

struct AnomalyLabels {
  Timestamp start = 0;
  std::int64_t interval = kSecondsPerHour;
  std::vector<bool> final;
  std::vector<SourceId> sources;
  std::vector<std::vector<bool>> individual;
  std::vector<PairLabels> pairwise;
  IndividualRule mode = IndividualRule::kZScore3;

  std::size_t length() const { return final.size(); }
  // Union of the per-source individual vectors.
  std::vector<bool> individual_union() const;
  // Union of all pairwise vectors.
  std::vector<bool> pairwise_union() const;
};

// Proportions over T, named after the usual accounting rows.
struct LabelReport {
  std::size_t length = 0;
  std::size_t individual_count = 0;
  std::size_t correlation_count = 0;
  std::size_t intersection_count = 0;
  std::size_t individual_only_count = 0;
  std::size_t correlation_only_count = 0;
  std::size_t final_count = 0;

  double individual = 0.0;        // (a)
  double correlation = 0.0;       // (b)
  double intersection = 0.0;      // (a) and (b)
  double individual_only = 0.0;   // (a) - (b)
  double correlation_only = 0.0;  // (b) - (a)
  double final_ratio = 0.0;
};

struct LabelResult {
  AnomalyLabels labels;
  LabelReport report;
};

std::vector<bool> individual_anomalies(std::span<const double> column,
                                       const LabelingOptions& options = {});

// Regresses y on x and flags D_i > 4 / (T - 2). An exact fit yields no flags.
std::vector<bool> pairwise_anomalies(std::span<const double> x,
                                     std::span<const double> y);

LabelResult label_dataset(const TimeSeriesTable& table,
                          const SourcePartition& partition,
                          const LabelingOptions& options = {});
LabelResult label_dataset(const TimeSeriesTable& table,
                          const SourcePartition& partition,
                          const CorrelationMatrix& correlations,
                          const LabelingOptions& options = {});

LabelReport make_report(const AnomalyLabels& labels);

// One label per sliding window of length seq_len (window k ends at
// k + seq_len - 1).
std::vector<bool> window_labels(const std::vector<bool>& point_labels,
                                std::size_t seq_len,
                                WindowRule rule = WindowRule::kLast);
std::vector<bool> window_labels(const AnomalyLabels& labels,
                                std::size_t seq_len,
                                WindowRule rule = WindowRule::kLast);

void write_labels_csv(std::ostream& out, const AnomalyLabels& labels);
void save_labels(const std::filesystem::path& path,
                 const AnomalyLabels& labels);
AnomalyLabels load_labels(const std::filesystem::path& path);

Json report_to_json(const LabelReport& report);

}  // namespace multien
