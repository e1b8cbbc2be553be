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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "multien/classifier.hpp"
#include "multien/evaluation.hpp"
#include "multien/extractors.hpp"
#include "multien/labeling.hpp"
#include "multien/planner.hpp"
#include "multien/timeseries.hpp"

namespace multien {

enum class Architecture { kProposed, kEarlyAll, kLateAll, kFlatUsad, kFlatLstmAe };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);
std::vector<Architecture> baseline_architectures();

struct SplitSpec {
  double train_fraction = 0.7;  // chronological
};

struct DetectorConfig {
  ExtractorConfig extractor;
  BoostConfig classifier;
  SplitSpec split;
  std::size_t seq_len = kDefaultSeqLen;
  WindowRule window_rule = WindowRule::kLast;
  // Also drop windows with an anomaly anywhere inside from extractor training.
  bool exclude_any_overlap = false;
  unsigned threads = 1;
};

Json detector_config_to_json(const DetectorConfig& cfg);

// One feature extractor and the sources whose channels it consumes.
struct DetectorGroup {
  std::string id;
  std::vector<SourceId> sources;
  ExtractorKind kind = ExtractorKind::kUsad;
};

// Groups are ordered early, late (plan order), non-correlated.
std::vector<DetectorGroup> architecture_groups(Architecture arch,
                                               const FusionPlan& plan,
                                               ExtractorKind base_kind);

// Per-group extractor seed derived from the base seed and the group id.
std::uint64_t group_seed(std::uint64_t base, const std::string& group_id);

std::size_t split_row(std::size_t rows, const SplitSpec& split);

struct TrainedDetector {
  Architecture architecture = Architecture::kProposed;
  FusionPlan plan;
  DetectorConfig config;
  std::vector<DetectorGroup> groups;
  std::vector<TrainedExtractor> extractors;  // parallel to groups
  BoostedModel classifier;
  ScalingParams scaling;
  std::vector<FeatureSpan> layout;
  std::size_t split_row = 0;  // first test row of the training table
  std::size_t training_rows = 0;
  // Classifier output on the training windows, for replay checks.
  std::vector<double> train_scores;
};

struct AssembledFeatures {
  FeatureMatrix features;  // one row per window
  std::vector<FeatureSpan> layout;
};

// `table` must already be scaled.
AssembledFeatures assemble_features(const std::vector<DetectorGroup>& groups,
                                    const std::vector<TrainedExtractor>& extractors,
                                    const TimeSeriesTable& table,
                                    std::size_t seq_len);

TrainedDetector train_detector(const TimeSeriesTable& table,
                               const AnomalyLabels& labels,
                               const FusionPlan& plan, Architecture arch,
                               const DetectorConfig& cfg = {});

std::map<std::string, TrainedDetector> build_baselines(
    const TimeSeriesTable& table, const AnomalyLabels& labels,
    const FusionPlan& plan, const DetectorConfig& cfg = {});

// Window probabilities for every window of `table` (window k ends at row
// k + seq_len - 1). Sources are matched by name.
std::vector<double> score(const TrainedDetector& detector,
                          const TimeSeriesTable& table);
// Scaled features exactly as the classifier sees them.
AssembledFeatures detector_features(const TrainedDetector& detector,
                                    const TimeSeriesTable& table);

struct SplitScores {
  std::vector<double> scores;
  std::vector<bool> labels;
  std::size_t first_window = 0;
};

// Test windows: those whose final row is at or after the split row.
SplitScores test_scores(const TrainedDetector& detector,
                        const TimeSeriesTable& table,
                        const AnomalyLabels& labels);

EvalReport evaluate_detector(const TrainedDetector& detector,
                             const TimeSeriesTable& table,
                             const AnomalyLabels& labels);

// Bundle: plan.json, scaling.json, extractor_<group>.bin, classifier.json,
// manifest.json. `extra_manifest` keys are merged into the manifest.
void save_bundle(const std::filesystem::path& dir, const TrainedDetector& detector,
                 const Json& extra_manifest = Json::object());
TrainedDetector load_bundle(const std::filesystem::path& dir);
// Byte image of every bundle file except the manifest, in a fixed order.
std::string detector_bytes(const TrainedDetector& detector);

}  // namespace multien
