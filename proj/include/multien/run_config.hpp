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
#include <string>
#include <string_view>

#include "multien/classifier.hpp"
#include "multien/extractors.hpp"
#include "multien/labeling.hpp"
#include "multien/pipeline.hpp"
#include "multien/planner.hpp"
#include "multien/timeseries.hpp"

namespace multien {

enum class ThresholdMode {
  kSweep,    // best F1 over the grid on the test windows
  kFixed,    // `threshold.value`
  kHoldout,  // pick on the leading part of the test windows, report the rest
};

std::string_view to_string(ThresholdMode mode);
ThresholdMode threshold_mode_from_string(std::string_view name);

struct ThresholdConfig {
  ThresholdMode mode = ThresholdMode::kSweep;
  double value = 0.5;
  double holdout_fraction = 0.5;
};

struct PlannerConfig {
  double correlation_threshold = kDefaultCorrelationThreshold;
  bool use_absolute = false;
  AverageMode average = AverageMode::kOverEarly;
};

struct AttributionConfig {
  std::size_t n_perms = 200;
  std::size_t background_rows = 100;
  std::size_t explained_rows = 200;
  std::uint64_t seed = 0;
};

// Everything a run needs besides its input files.
struct RunConfig {
  ExtractorConfig extractor;
  BoostConfig classifier;
  SplitSpec split;
  LabelingOptions labeling;
  PlannerConfig planner;
  std::size_t seq_len = kDefaultSeqLen;
  WindowRule window_rule = WindowRule::kLast;
  bool exclude_any_overlap = false;
  ThresholdConfig threshold;
  AttributionConfig attribution;
};

Json run_config_to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys throw InvalidConfig.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Applies "section.key=value" to the JSON form of `cfg`. The value is parsed
// as JSON when possible and taken as a string otherwise.
RunConfig apply_override(const RunConfig& cfg, std::string_view assignment);

// Sets the extractor, classifier and attribution seeds together.
void set_all_seeds(RunConfig& cfg, std::uint64_t seed);

DetectorConfig to_detector_config(const RunConfig& cfg, unsigned threads);

// SHA-256 of the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

}  // namespace multien
