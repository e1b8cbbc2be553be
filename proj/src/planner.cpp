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

#include "multien/planner.hpp"

#include <algorithm>
#include <set>

#include "multien/error.hpp"

namespace multien {
namespace {

bool contains(const std::vector<SourceId>& v, const SourceId& id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

std::vector<SourceId> sorted_by_name(std::vector<SourceId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Mean coefficient of `id` to `others` (excluding itself), summed in name
// order so the result does not depend on matrix layout.
double mean_association(const CorrelationMatrix& m, const SourceId& id,
                        const std::vector<SourceId>& others,
                        bool use_absolute) {
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t i = m.index(id);
  for (const auto& o : sorted_by_name(others)) {
    if (o == id) continue;
    sum += association(m, i, m.index(o), use_absolute);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<SourceId> order_late(const CorrelationMatrix& m,
                                 std::vector<SourceId> late, bool use_absolute) {
  std::vector<std::pair<double, SourceId>> keyed;
  for (auto& id : late) {
    keyed.emplace_back(mean_association(m, id, m.sources(), use_absolute), id);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<SourceId> out;
  for (auto& [avg, id] : keyed) out.push_back(id);
  return out;
}

}  // namespace

std::string_view to_string(AverageMode mode) {
  return mode == AverageMode::kOverEarly ? "over_early" : "remainder";
}

AverageMode average_mode_from_string(std::string_view name) {
  if (name == "over_early") return AverageMode::kOverEarly;
  if (name == "remainder") return AverageMode::kRemainderDenominator;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown planner average mode '" + std::string(name) + "'");
}

std::string_view to_string(PlanDecision d) {
  switch (d) {
    case PlanDecision::kSeed: return "seed";
    case PlanDecision::kAdmit: return "admit";
    case PlanDecision::kReject: return "reject";
    case PlanDecision::kNotMin: return "not_min";
  }
  return "not_min";
}

PlanDecision plan_decision_from_string(std::string_view name) {
  if (name == "seed") return PlanDecision::kSeed;
  if (name == "admit") return PlanDecision::kAdmit;
  if (name == "reject") return PlanDecision::kReject;
  if (name == "not_min") return PlanDecision::kNotMin;
  throw Error(ErrorCode::kParseError,
              "unknown plan decision '" + std::string(name) + "'");
}

std::vector<SourceId> FusionPlan::all_sources() const {
  std::vector<SourceId> all = early;
  all.insert(all.end(), late.begin(), late.end());
  all.insert(all.end(), non_correlated.begin(), non_correlated.end());
  return all;
}

std::pair<SourceId, SourceId> seed_pair(const CorrelationMatrix& m,
                                        const std::vector<SourceId>& correlated,
                                        bool use_absolute) {
  if (correlated.size() < 2) {
    throw Error(ErrorCode::kTooFewSources,
                "seed pair needs at least two correlated sources");
  }
  std::vector<std::pair<double, SourceId>> keyed;
  for (const auto& id : correlated) {
    keyed.emplace_back(mean_association(m, id, correlated, use_absolute), id);
  }
  std::sort(keyed.begin(), keyed.end());
  return {keyed[0].second, keyed[1].second};
}

FusionPlan plan_fusion(const CorrelationMatrix& m,
                       const SourcePartition& partition,
                       const PlannerOptions& options) {
  FusionPlan plan;
  plan.threshold = partition.threshold;
  plan.use_absolute = partition.use_absolute;
  plan.non_correlated = partition.non_correlated;
  const auto& correlated = partition.correlated;
  const bool abs = partition.use_absolute;

  if (correlated.size() < 2) {
    log_warning("fewer than two correlated sources; all go to late fusion");
    plan.late = order_late(m, correlated, abs);
    return plan;
  }

  auto [first, second] = seed_pair(m, correlated, abs);
  for (const auto& s : {first, second}) {
    plan.trace.push_back(
        {0, s, mean_association(m, s, correlated, abs), PlanDecision::kSeed});
  }
  plan.early = {first, second};

  std::vector<SourceId> remaining;
  for (const auto& id : sorted_by_name(correlated)) {
    if (!contains(plan.early, id)) remaining.push_back(id);
  }
  const std::size_t n = correlated.size();
  std::size_t round = 1;
  while (!remaining.empty()) {
    std::vector<double> scores;
    for (const auto& k : remaining) {
      double score = mean_association(m, k, plan.early, abs);
      if (options.average == AverageMode::kRemainderDenominator) {
        const double sum = score * static_cast<double>(plan.early.size());
        const auto p = plan.early.size();
        const double denom =
            n > p + 1 ? static_cast<double>(n - (p + 1)) : 1.0;
        score = sum / denom;
      }
      scores.push_back(score);
    }
    // `remaining` is name-sorted, so the first minimum wins ties.
    const auto best = static_cast<std::size_t>(
        std::min_element(scores.begin(), scores.end()) - scores.begin());
    const bool admit = scores[best] < plan.threshold;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      PlanDecision d = PlanDecision::kNotMin;
      if (k == best) d = admit ? PlanDecision::kAdmit : PlanDecision::kReject;
      plan.trace.push_back({round, remaining[k], scores[k], d});
    }
    if (!admit) break;
    plan.early.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    ++round;
  }
  plan.late = order_late(m, remaining, abs);
  return plan;
}

FusionPlan make_plan(std::vector<SourceId> early, std::vector<SourceId> late,
                     std::vector<SourceId> non_correlated, double threshold) {
  FusionPlan plan;
  plan.early = std::move(early);
  plan.late = std::move(late);
  plan.non_correlated = std::move(non_correlated);
  plan.threshold = threshold;
  const auto all = plan.all_sources();
  if (all.empty()) {
    throw Error(ErrorCode::kPlanMismatch, "plan has no sources");
  }
  std::set<SourceId> unique(all.begin(), all.end());
  if (unique.size() != all.size()) {
    throw Error(ErrorCode::kPlanMismatch, "plan tiers overlap");
  }
  return plan;
}

FusionPlan replay_trace(const FusionPlan& plan, const CorrelationMatrix& m) {
  FusionPlan out;
  out.threshold = plan.threshold;
  out.use_absolute = plan.use_absolute;
  out.non_correlated = plan.non_correlated;
  out.trace = plan.trace;
  std::vector<SourceId> evaluated;
  for (const auto& e : plan.trace) {
    if (e.decision == PlanDecision::kSeed || e.decision == PlanDecision::kAdmit) {
      out.early.push_back(e.candidate);
    }
    if (!contains(evaluated, e.candidate)) evaluated.push_back(e.candidate);
  }
  std::vector<SourceId> late;
  for (const auto& id : evaluated) {
    if (!contains(out.early, id)) late.push_back(id);
  }
  // Without a seed round every correlated source was sent to late fusion.
  if (plan.trace.empty()) late = plan.late;
  out.late = order_late(m, late, plan.use_absolute);
  return out;
}

void check_plan_covers(const FusionPlan& plan,
                       const std::vector<SourceId>& sources) {
  const auto all = plan.all_sources();
  std::set<SourceId> a(all.begin(), all.end());
  std::set<SourceId> b(sources.begin(), sources.end());
  if (a.size() != all.size() || a != b) {
    throw Error(ErrorCode::kPlanMismatch,
                "plan tiers do not partition the table's sources");
  }
}

Json plan_to_json(const FusionPlan& plan) {
  Json j;
  j["early"] = to_names(plan.early);
  j["late"] = to_names(plan.late);
  j["non_correlated"] = to_names(plan.non_correlated);
  j["threshold"] = plan.threshold;
  j["use_absolute"] = plan.use_absolute;
  Json trace = Json::array();
  for (const auto& e : plan.trace) {
    trace.push_back({{"round", e.round},
                     {"candidate", e.candidate.str()},
                     {"avg_corr", e.avg_corr},
                     {"decision", to_string(e.decision)}});
  }
  j["trace"] = trace;
  return j;
}

FusionPlan plan_from_json(const Json& j) {
  try {
    FusionPlan plan;
    plan.early = to_source_ids(j.at("early").get<std::vector<std::string>>());
    plan.late = to_source_ids(j.at("late").get<std::vector<std::string>>());
    plan.non_correlated =
        to_source_ids(j.at("non_correlated").get<std::vector<std::string>>());
    plan.threshold = j.at("threshold").get<double>();
    plan.use_absolute = j.value("use_absolute", false);
    if (j.contains("trace")) {
      for (const auto& e : j["trace"]) {
        plan.trace.push_back(
            {e.at("round").get<std::size_t>(),
             SourceId(e.at("candidate").get<std::string>()),
             e.at("avg_corr").get<double>(),
             plan_decision_from_string(e.at("decision").get<std::string>())});
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad plan JSON: ") + ex.what());
  }
}

}  // namespace multien
