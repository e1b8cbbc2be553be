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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "multien/timeseries.hpp"

namespace multien {

// Rank-based AUROC with midranks. Throws SingleClass, LengthMismatch.
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct F1Result {
  double f1 = 0.0;           // positive class
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  Confusion confusion;
};

// A window is predicted anomalous when score >= threshold. Empty-class F1
// is 0.
F1Result f1_suite(std::span<const double> scores,
                  const std::vector<bool>& labels, double threshold);
F1Result f1_from_confusion(const Confusion& c);

// 0.00, 0.01, ..., 1.00
std::vector<double> default_threshold_grid();

struct EvalReport {
  double auroc = 0.0;  // NaN when only one class is present
  double f1 = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double best_threshold = 0.0;
  Confusion confusion;
};

// Highest positive-class F1 over the grid, ties to the lowest threshold.
EvalReport best_threshold_sweep(std::span<const double> scores,
                                const std::vector<bool>& labels,
                                const std::vector<double>& grid =
                                    default_threshold_grid());

// Picks the threshold on the leading `fraction` of the scores and reports
// metrics on the rest.
EvalReport holdout_threshold_eval(std::span<const double> scores,
                                  const std::vector<bool>& labels,
                                  double fraction = 0.5,
                                  const std::vector<double>& grid =
                                      default_threshold_grid());

Json eval_report_to_json(const EvalReport& r);
EvalReport eval_report_from_json(const Json& j);
// Mean and sample standard deviation of each metric.
Json aggregate_reports(const std::vector<EvalReport>& reports);

// Named contiguous column range of a feature matrix.
struct FeatureSpan {
  std::string group;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t width() const { return end - begin; }
  friend bool operator==(const FeatureSpan&, const FeatureSpan&) = default;
};

using PredictFn = std::function<std::vector<double>(const Eigen::MatrixXd&)>;

struct ShapleyOptions {
  std::size_t n_perms = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct GroupAttribution {
  std::string group;
  double mean_abs = 0.0;
  double mean_signed = 0.0;
  std::size_t rank = 0;  // 1 = largest mean |contribution|
};

struct AttributionReport {
  std::vector<GroupAttribution> groups;  // layout order
  // Per explained row and group, signed contributions.
  Eigen::MatrixXd contributions;
  // max over rows of |sum_g phi_g - (f(x) - mean f(background))|
  double efficiency_residual = 0.0;
  std::size_t n_perms = 0;
  std::size_t background_rows = 0;
  std::size_t explained_rows = 0;
  std::uint64_t seed = 0;
};

// Interventional Monte-Carlo Shapley values over feature groups. Results do
// not depend on `threads`: each explained row draws from its own seeded
// stream.
AttributionReport shapley_groups(const PredictFn& predict,
                                 const Eigen::MatrixXd& explained,
                                 const Eigen::MatrixXd& background,
                                 const std::vector<FeatureSpan>& layout,
                                 const ShapleyOptions& options = {});

Json attribution_to_json(const AttributionReport& r);

}  // namespace multien
