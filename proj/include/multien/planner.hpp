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

#include <string>
#include <utility>
#include <vector>

#include "multien/stats.hpp"
#include "multien/timeseries.hpp"

namespace multien {

enum class AverageMode {
  // Mean coefficient to the current members of the early set.
  kOverEarly,
  // Sum over the early set divided by n - (p + 1), clamped to at least 1.
  kRemainderDenominator,
};

std::string_view to_string(AverageMode mode);
AverageMode average_mode_from_string(std::string_view name);

struct PlannerOptions {
  AverageMode average = AverageMode::kOverEarly;
};

enum class PlanDecision { kSeed, kAdmit, kReject, kNotMin };

std::string_view to_string(PlanDecision d);
PlanDecision plan_decision_from_string(std::string_view name);

struct PlanTraceEntry {
  std::size_t round = 0;
  SourceId candidate;
  // For seeds: mean coefficient to the other correlated sources.
  double avg_corr = 0.0;
  PlanDecision decision = PlanDecision::kNotMin;
};

struct FusionPlan {
  std::vector<SourceId> early;           // admission order
  std::vector<SourceId> late;            // strongest first
  std::vector<SourceId> non_correlated;
  double threshold = kDefaultCorrelationThreshold;
  bool use_absolute = false;
  std::vector<PlanTraceEntry> trace;

  std::vector<SourceId> all_sources() const;
};

// The two correlated sources with the weakest mean coefficient to the other
// correlated sources; ties resolve by name.
std::pair<SourceId, SourceId> seed_pair(const CorrelationMatrix& m,
                                        const std::vector<SourceId>& correlated,
                                        bool use_absolute = false);

FusionPlan plan_fusion(const CorrelationMatrix& m,
                       const SourcePartition& partition,
                       const PlannerOptions& options = {});

// Hand-specified placement (ablations). Throws PlanMismatch unless the three
// sets are disjoint and non-empty in total.
FusionPlan make_plan(std::vector<SourceId> early, std::vector<SourceId> late,
                     std::vector<SourceId> non_correlated,
                     double threshold = kDefaultCorrelationThreshold);

// Rebuilds early/late membership from the trace alone.
FusionPlan replay_trace(const FusionPlan& plan, const CorrelationMatrix& m);

// Throws PlanMismatch if the plan does not cover exactly `sources`.
void check_plan_covers(const FusionPlan& plan,
                       const std::vector<SourceId>& sources);

Json plan_to_json(const FusionPlan& plan);
FusionPlan plan_from_json(const Json& j);

}  // namespace multien
