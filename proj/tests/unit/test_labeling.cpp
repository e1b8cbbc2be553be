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
#include <numeric>
#include <sstream>

#include "multien/error.hpp"
#include "multien/labeling.hpp"
#include "multien/stats.hpp"
#include "multien/synthgen.hpp"
#include "support.hpp"

using namespace multien;

namespace {

std::size_t count(const std::vector<bool>& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
}

LabelResult label_table(const TimeSeriesTable& t, const LabelingOptions& opt = {}) {
  const auto m = correlation_matrix(t);
  return label_dataset(t, partition_sources(m, kDefaultCorrelationThreshold), m, opt);
}

}  // namespace

TEST_SUITE("labeling") {

TEST_CASE("constant column has no individual anomalies") {
  const std::vector<double> c(50, 2.0);
  CHECK(count(individual_anomalies(c)) == 0);
  CHECK(count(individual_anomalies(c, {IndividualRule::kMean3x})) == 0);
}

TEST_CASE("single spike is the only individual anomaly under both rules") {
  std::vector<double> c(1000, 1.0);
  c[417] = 100.0;
  for (auto rule : {IndividualRule::kZScore3, IndividualRule::kMean3x}) {
    const auto f = individual_anomalies(c, {rule});
    CHECK(count(f) == 1);
    CHECK(f[417]);
  }
}

TEST_CASE("gaussian upper tail rate") {
  std::mt19937_64 rng(31);
  const auto c = multien::test::gaussian(100000, rng);
  const double frac = static_cast<double>(count(individual_anomalies(c))) / 1e5;
  CHECK(std::abs(frac - 0.00135) < 0.0005);
  const double two = static_cast<double>(count(individual_anomalies(c, {IndividualRule::kZScore3, true}))) / 1e5;
  CHECK(std::abs(two - 0.0027) < 0.0008);
}

TEST_CASE("pairwise anomalies") {
  std::vector<double> x(100), y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = static_cast<double>(i);
    y[i] = 2.0 * x[i];
  }
  CHECK(count(pairwise_anomalies(x, y)) == 0);

  std::mt19937_64 rng(3);
  const auto e = multien::test::gaussian(100, rng, 0.0, 0.5);
  for (std::size_t i = 0; i < 100; ++i) y[i] += e[i];
  y[60] += 40.0;
  const auto f = pairwise_anomalies(x, y);
  CHECK(f[60]);
  const auto d = cooks_distance(fit_simple_regression(x, y));
  CHECK(d[60] > 4.0 / 98.0);
}

TEST_CASE("flagged fraction on a correlated pair") {
  std::mt19937_64 rng(8);
  const auto z = multien::test::gaussian(10000, rng);
  const auto e1 = multien::test::gaussian(10000, rng);
  const auto e2 = multien::test::gaussian(10000, rng);
  // Loadings giving rho = 0.6.
  const double a = std::sqrt(0.6), b = std::sqrt(0.4);
  std::vector<double> x(10000), y(10000);
  for (std::size_t i = 0; i < 10000; ++i) {
    x[i] = a * z[i] + b * e1[i];
    y[i] = a * z[i] + b * e2[i];
  }
  const double frac = static_cast<double>(count(pairwise_anomalies(x, y))) / 1e4;
  CHECK(frac > 0.02);
  CHECK(frac < 0.08);
}

TEST_CASE("all-constant table") {
  const auto t = multien::test::make_table({"a", "b"}, {std::vector<double>(30, 1.0), std::vector<double>(30, 4.0)});
  const auto r = label_table(t);
  CHECK(count(r.labels.final) == 0);
  CHECK(r.report.final_ratio == 0.0);
  CHECK(r.report.individual == 0.0);
  CHECK(r.report.correlation == 0.0);
}

TEST_CASE("final is the union and the report identities hold") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto spec = default_synth_spec(seed);
    spec.length = 3000;
    const auto g = generate(spec);
    const auto r = label_table(g.table);
    const auto& L = r.labels;
    const auto a = L.individual_union();
    const auto b = L.pairwise_union();
    for (std::size_t t = 0; t < L.length(); ++t) CHECK(L.final[t] == (a[t] || b[t]));
    const auto& rep = r.report;
    CHECK(rep.individual_count == rep.intersection_count + rep.individual_only_count);
    CHECK(rep.final_count == rep.individual_count + rep.correlation_only_count);
    CHECK(std::abs(rep.final_ratio - (rep.individual + rep.correlation_only)) < 1e-15);
    for (double v : {rep.individual, rep.correlation, rep.intersection, rep.individual_only,
                     rep.correlation_only, rep.final_ratio}) {
      CHECK((v >= 0.0 && v <= 1.0));
    }
    // Both directions of every correlated pair.
    CHECK(L.pairwise.size() % 2 == 0);
  }
}

TEST_CASE("adding a pairwise set only grows the final labels") {
  auto spec = default_synth_spec(2);
  spec.length = 2000;
  auto L = label_table(generate(spec).table).labels;
  const auto before = L.final;
  std::vector<bool> extra(L.length(), false);
  for (std::size_t t = 0; t < L.length(); t += 97) extra[t] = true;
  L.pairwise.push_back({SourceId("x"), SourceId("y"), extra});
  const auto a = L.individual_union();
  const auto b = L.pairwise_union();
  for (std::size_t t = 0; t < L.length(); ++t) {
    const bool after = a[t] || b[t];
    if (before[t] || extra[t]) CHECK(after);
  }
}

TEST_CASE("labels are unchanged by min-max scaling") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 5; ++rep) {
    auto spec = default_synth_spec(rng());
    spec.length = 2000;
    const auto t = generate(spec).table;
    const auto scaled = apply_minmax(t, fit_minmax(t, {0, t.rows()}));
    const auto r1 = label_table(t);
    const auto r2 = label_table(scaled);
    CHECK(r1.labels.final == r2.labels.final);
    CHECK(r1.labels.individual == r2.labels.individual);
    REQUIRE(r1.labels.pairwise.size() == r2.labels.pairwise.size());
    for (std::size_t k = 0; k < r1.labels.pairwise.size(); ++k) {
      CHECK(r1.labels.pairwise[k].flags == r2.labels.pairwise[k].flags);
    }
  }
}

TEST_CASE("labeling is deterministic") {
  auto spec = default_synth_spec(5);
  spec.length = 1500;
  const auto t = generate(spec).table;
  CHECK(label_table(t).labels.final == label_table(t).labels.final);
}

TEST_CASE("non-correlated sources only contribute individual labels") {
  auto spec = five_source_synth_spec(1);
  spec.length = 3000;
  const auto t = generate(spec).table;
  const auto r = label_table(t);
  for (const auto& p : r.labels.pairwise) {
    CHECK(p.predictor.str() != "isolated");
    CHECK(p.response.str() != "isolated");
  }
  CHECK(r.labels.individual.size() == 5);
}

TEST_CASE("window labels") {
  std::vector<bool> p(30, false);
  CHECK(count(window_labels(p, 12)) == 0);
  p[11] = true;
  const auto w = window_labels(p, 12);
  CHECK(w.size() == 19);
  CHECK(w[0]);
  CHECK_FALSE(w[1]);
  const auto any = window_labels(p, 12, WindowRule::kAny);
  CHECK(count(any) == 12);
  CHECK(multien::test::error_code([&] { window_labels(std::vector<bool>(5, false), 12); }) ==
        ErrorCode::kTooShort);

  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.1);
  std::vector<bool> q(500);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = coin(rng);
  std::size_t tail = 0;
  for (std::size_t i = 11; i < q.size(); ++i) tail += q[i];
  CHECK(count(window_labels(q, 12)) == tail);
  // The any rule agrees with a direct scan.
  const auto qa = window_labels(q, 12, WindowRule::kAny);
  for (std::size_t k = 0; k < qa.size(); ++k) {
    bool hit = false;
    for (std::size_t i = k; i < k + 12; ++i) hit = hit || q[i];
    CHECK(qa[k] == hit);
  }
}

TEST_CASE("labels csv round trip") {
  auto spec = default_synth_spec(9);
  spec.length = 500;
  const auto L = label_table(generate(spec).table).labels;
  const auto path = multien::test::scratch_dir("labels_rt") / "labels.csv";
  save_labels(path, L);
  const auto back = load_labels(path);
  CHECK(back.final == L.final);
  CHECK(back.sources == L.sources);
  CHECK(back.individual == L.individual);
  REQUIRE(back.pairwise.size() == L.pairwise.size());
  for (std::size_t k = 0; k < L.pairwise.size(); ++k) {
    CHECK(back.pairwise[k].predictor == L.pairwise[k].predictor);
    CHECK(back.pairwise[k].flags == L.pairwise[k].flags);
  }
  CHECK(back.start == L.start);
  const auto j = report_to_json(make_report(back));
  CHECK(j.contains("Final ratio"));
}

}  // TEST_SUITE
