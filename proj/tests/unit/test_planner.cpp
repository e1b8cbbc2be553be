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

#include <algorithm>
#include <fstream>
#include <numeric>

#include "multien/error.hpp"
#include "multien/planner.hpp"
#include "multien/synthgen.hpp"
#include "support.hpp"

using namespace multien;

namespace {

CorrelationMatrix load_matrix(const std::string& name) {
  std::ifstream in(multien::test::data_path(name));
  REQUIRE(in);
  return correlation_from_json(Json::parse(in));
}

FusionPlan plan_for(const CorrelationMatrix& m, const PlannerOptions& opt = {}) {
  return plan_fusion(m, partition_sources(m, kDefaultCorrelationThreshold), opt);
}

std::vector<SourceId> ids(std::initializer_list<const char*> names) {
  std::vector<SourceId> out;
  for (const char* n : names) out.emplace_back(n);
  return out;
}

std::vector<SourceId> sorted(std::vector<SourceId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Same matrix with its sources reordered by `order`.
CorrelationMatrix permute(const CorrelationMatrix& m, const std::vector<std::size_t>& order) {
  const std::size_t n = m.size();
  std::vector<SourceId> s;
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back(m.sources()[order[i]]);
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = m.at(order[i], order[j]);
  }
  return CorrelationMatrix(s, v);
}

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("three-source household plan") {
  const auto m = load_matrix("ampds2_like_correlation.json");
  const auto part = partition_sources(m, 0.2);
  CHECK(part.non_correlated.empty());
  const auto [a, b] = seed_pair(m, part.correlated);
  CHECK(sorted({a, b}) == ids({"gas", "power"}));
  const auto plan = plan_for(m);
  CHECK(sorted(plan.early) == ids({"gas", "power"}));
  CHECK(plan.late == ids({"water"}));
  CHECK(plan.non_correlated.empty());
}

TEST_CASE("five-source household plan") {
  const auto m = load_matrix("eck5_like_correlation.json");
  const auto plan = plan_for(m);
  CHECK(sorted(plan.early) == ids({"gas", "hot_water"}));
  CHECK(sorted(plan.late) == ids({"power", "water"}));
  CHECK(plan.non_correlated == ids({"heating"}));
  // Strongest first: water averages 0.2875 against power's 0.2685.
  CHECK(plan.late == ids({"water", "power"}));
}

TEST_CASE("six-source greedy trace matches the hand computation") {
  const auto m = load_matrix("six_source_correlation.json");
  const auto plan = plan_for(m);
  CHECK(plan.early == ids({"w1", "w2", "w3"}));
  CHECK(plan.late == ids({"s1", "s2"}));
  CHECK(plan.non_correlated == ids({"iso"}));

  struct Row {
    std::size_t round;
    const char* id;
    double avg;
    PlanDecision d;
  };
  // Seeds average over the four other correlated sources; later rounds over P.
  const Row want[] = {
      {0, "w1", (0.02 + 0.04 + 0.3 + 0.3) / 4, PlanDecision::kSeed},
      {0, "w2", (0.02 + 0.06 + 0.3 + 0.3) / 4, PlanDecision::kSeed},
      {1, "s1", 0.3, PlanDecision::kNotMin},
      {1, "s2", 0.3, PlanDecision::kNotMin},
      {1, "w3", (0.04 + 0.06) / 2, PlanDecision::kAdmit},
      {2, "s1", 0.3, PlanDecision::kReject},
      {2, "s2", 0.3, PlanDecision::kNotMin},
  };
  REQUIRE(plan.trace.size() == std::size(want));
  for (std::size_t k = 0; k < plan.trace.size(); ++k) {
    CHECK(plan.trace[k].round == want[k].round);
    CHECK(plan.trace[k].candidate.str() == want[k].id);
    CHECK(plan.trace[k].avg_corr == doctest::Approx(want[k].avg).epsilon(1e-12));
    CHECK(plan.trace[k].decision == want[k].d);
  }
  for (const auto& e : plan.trace) {
    if (e.decision == PlanDecision::kAdmit) CHECK(e.avg_corr < plan.threshold);
  }
}

TEST_CASE("ties resolve by name") {
  CorrelationMatrix m(ids({"c", "b", "a"}), {1, .5, .5, .5, 1, .5, .5, .5, 1});
  const auto [x, y] = seed_pair(m, m.sources());
  CHECK(x.str() == "a");
  CHECK(y.str() == "b");
  const auto plan = plan_for(m);
  CHECK(plan.early == ids({"a", "b"}));
  CHECK(plan.late == ids({"c"}));
}

TEST_CASE("fewer than two correlated sources") {
  CorrelationMatrix m(ids({"a", "b"}), {1, 0.1, 0.1, 1});
  CHECK_THROWS_AS(seed_pair(m, ids({"a"})), Error);
  const auto plan = plan_for(m);
  CHECK(plan.early.empty());
  CHECK(plan.late.empty());
  CHECK(plan.non_correlated.size() == 2);
}

TEST_CASE("plan is invariant under source permutation") {
  const auto m = load_matrix("six_source_correlation.json");
  const auto base = plan_for(m);
  std::vector<std::size_t> order(m.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    std::shuffle(order.begin(), order.end(), rng);
    const auto p = plan_for(permute(m, order));
    CHECK(p.early == base.early);
    CHECK(p.late == base.late);
    CHECK(sorted(p.non_correlated) == sorted(base.non_correlated));
  }
}

TEST_CASE("plan is invariant under per-source rescaling of the data") {
  auto spec = default_synth_spec(4);
  spec.length = 4000;
  const auto t = generate(spec).table;
  const auto base = plan_for(correlation_matrix(t));
  std::vector<std::vector<double>> cols;
  for (std::size_t c = 0; c < t.width(); ++c) {
    std::vector<double> col;
    for (double v : t.column(c)) col.push_back(v * (0.5 + static_cast<double>(c)) + 3.0 * static_cast<double>(c));
    cols.push_back(col);
  }
  const auto scaled = multien::test::make_table(to_names(t.sources()), cols);
  const auto p = plan_for(correlation_matrix(scaled));
  CHECK(p.early == base.early);
  CHECK(p.late == base.late);
  CHECK(sorted(base.early) == ids({"weak_a", "weak_b"}));
  CHECK(sorted(base.late) == ids({"strong_a", "strong_b"}));
}

TEST_CASE("remainder denominator mode") {
  const auto m = load_matrix("six_source_correlation.json");
  const auto plan = plan_for(m, {AverageMode::kRemainderDenominator});
  // Round 1: n - (p + 1) = 2, so w3 scores (0.04 + 0.06) / 2.
  CHECK(plan.early == ids({"w1", "w2", "w3"}));
  CHECK(average_mode_from_string(to_string(AverageMode::kRemainderDenominator)) ==
        AverageMode::kRemainderDenominator);
}

TEST_CASE("trace replays to the emitted plan") {
  for (const char* name : {"ampds2_like_correlation.json", "eck5_like_correlation.json",
                           "six_source_correlation.json"}) {
    const auto m = load_matrix(name);
    const auto plan = plan_for(m);
    const auto replay = replay_trace(plan, m);
    CHECK(replay.early == plan.early);
    CHECK(replay.late == plan.late);
    CHECK(replay.non_correlated == plan.non_correlated);
  }
}

TEST_CASE("plan json round trip") {
  const auto m = load_matrix("eck5_like_correlation.json");
  const auto plan = plan_for(m);
  const auto back = plan_from_json(plan_to_json(plan));
  CHECK(back.early == plan.early);
  CHECK(back.late == plan.late);
  CHECK(back.non_correlated == plan.non_correlated);
  REQUIRE(back.trace.size() == plan.trace.size());
  for (std::size_t k = 0; k < plan.trace.size(); ++k) {
    CHECK(back.trace[k].avg_corr == plan.trace[k].avg_corr);
    CHECK(back.trace[k].decision == plan.trace[k].decision);
  }
}

TEST_CASE("manual plans") {
  const auto p = make_plan(ids({"a", "b"}), ids({"c"}), ids({"d"}));
  CHECK(p.all_sources().size() == 4);
  CHECK_NOTHROW(check_plan_covers(p, ids({"d", "c", "b", "a"})));
  CHECK(multien::test::error_code([&] { check_plan_covers(p, ids({"a", "b", "c"})); }) ==
        ErrorCode::kPlanMismatch);
  CHECK(multien::test::error_code([] { make_plan(ids({"a"}), ids({"a"}), {}); }) ==
        ErrorCode::kPlanMismatch);
  CHECK(multien::test::error_code([] { make_plan({}, {}, {}); }) == ErrorCode::kPlanMismatch);
}

}  // TEST_SUITE
