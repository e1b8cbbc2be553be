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

#include "multien/error.hpp"
#include "multien/labeling.hpp"
#include "multien/stats.hpp"
#include "multien/synthgen.hpp"
#include "support.hpp"

using namespace multien;

namespace {

SynthSpec clean_spec(std::uint64_t seed, std::size_t length) {
  auto spec = default_synth_spec(seed);
  spec.length = length;
  spec.anomalies.rate_individual = 0.0;
  spec.anomalies.rate_corrbreak = 0.0;
  return spec;
}

double zscore(const TimeSeriesTable& t, std::size_t c, std::size_t row) {
  const auto col = t.column(c);
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(col.size());
  double ss = 0.0;
  for (double v : col) ss += (v - mean) * (v - mean);
  return (col[row] - mean) / std::sqrt(ss / static_cast<double>(col.size()));
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("same seed gives identical output") {
  auto spec = default_synth_spec(3);
  spec.length = 2000;
  const auto a = generate(spec);
  const auto b = generate(spec);
  for (std::size_t c = 0; c < a.table.width(); ++c) {
    CHECK(std::vector<double>(a.table.column(c).begin(), a.table.column(c).end()) ==
          std::vector<double>(b.table.column(c).begin(), b.table.column(c).end()));
  }
  CHECK(a.truth.type == b.truth.type);
  spec.seed = 4;
  const auto c = generate(spec);
  CHECK(c.table.value(10, 0) != a.table.value(10, 0));
}

TEST_CASE("two sources reach the requested correlation") {
  SynthSpec spec;
  spec.length = 20000;
  spec.seed = 6;
  spec.anomalies.rate_individual = 0.0;
  spec.anomalies.rate_corrbreak = 0.0;
  // Equal loadings a with unit noise give rho = a^2 / (a^2 + 1) = 0.5.
  spec.sources = {{"x", 1.0, 1.0, 10.0, 1.0, "kWh"}, {"y", 1.0, 1.0, 10.0, 2.0, "kWh"}};
  CHECK(spec.implied_correlation(0, 1) == doctest::Approx(0.5));
  const auto g = generate(spec);
  const double r = *pearson(g.table.column(0), g.table.column(1));
  CHECK(r >= 0.45);
  CHECK(r <= 0.55);
  CHECK(g.clipped_cells == 0);
}

TEST_CASE("default spec correlations follow the implied values") {
  const auto spec = clean_spec(7, 20000);
  const auto g = generate(spec);
  CHECK(static_cast<double>(g.clipped_cells) < 1e-3 * 20000 * 4);
  const auto m = correlation_matrix(g.table);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(m.at(i, j) - spec.implied_correlation(i, j)) < 0.05);
    }
  }
  // Weak pair straddles the partition threshold from above.
  CHECK(m.at(0, 1) > kDefaultCorrelationThreshold);
  CHECK(m.at(2, 3) > 0.85);
}

TEST_CASE("five-source spec adds an uncorrelated source") {
  auto spec = five_source_synth_spec(2);
  spec.length = 10000;
  const auto g = generate(spec);
  const auto m = correlation_matrix(g.table);
  const auto part = partition_sources(m, kDefaultCorrelationThreshold);
  CHECK(part.non_correlated == to_source_ids({"isolated"}));
  CHECK(part.correlated.size() == 4);
}

TEST_CASE("anomaly counts and break placement") {
  auto spec = default_synth_spec(8);
  spec.anomalies.rate_individual = 0.0;
  const auto g = generate(spec);
  const auto breaks = g.truth.mask(AnomalyType::kCorrbreak);
  CHECK(std::count(breaks.begin(), breaks.end(), true) == 200);
  for (std::size_t t = 0; t < breaks.size(); ++t) {
    if (!breaks[t]) continue;
    for (std::size_t c = 0; c < g.table.width(); ++c) CHECK(std::abs(zscore(g.table, c, t)) < 3.0);
    // The replaced member sits on a strongly correlated pair.
    CHECK(spec.implied_correlation(static_cast<std::size_t>(g.truth.source[t]),
                                   static_cast<std::size_t>(g.truth.partner[t])) >= 0.5);
  }
  auto with_spikes = default_synth_spec(8);
  const auto h = generate(with_spikes);
  const auto spikes = h.truth.mask(AnomalyType::kIndividual);
  CHECK(std::count(spikes.begin(), spikes.end(), true) == 50);
  for (std::size_t t = 0; t < spikes.size(); ++t) {
    if (spikes[t]) CHECK(h.truth.source[t] >= 0);
  }
}

TEST_CASE("invalid specs") {
  auto spec = default_synth_spec();
  spec.length = 100;
  CHECK(multien::test::error_code([&] { generate(spec); }) == ErrorCode::kInvalidSpec);
  spec = default_synth_spec();
  spec.sources[1].noise = 0.0;
  CHECK(multien::test::error_code([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  spec = default_synth_spec();
  spec.sources[1].name = spec.sources[0].name;
  CHECK(multien::test::error_code([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  spec = default_synth_spec();
  spec.anomalies.rate_corrbreak = 0.5;
  CHECK(multien::test::error_code([&] { validate_spec(spec); }) == ErrorCode::kInvalidSpec);
  auto j = synth_spec_to_json(default_synth_spec());
  j["colour"] = "red";
  CHECK(multien::test::error_code([&] { synth_spec_from_json(j); }) == ErrorCode::kInvalidSpec);
  // Bounds that no timestamp can satisfy.
  spec = default_synth_spec();
  spec.length = 400;
  spec.anomalies.corrbreak_partner_z = 20.0;
  spec.anomalies.corrbreak_max_z = 25.0;
  CHECK(multien::test::error_code([&] { generate(spec); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("spec json round trip") {
  auto spec = five_source_synth_spec(42);
  spec.anomalies.spike_max = 7.5;
  const auto back = synth_spec_from_json(synth_spec_to_json(spec));
  CHECK(synth_spec_to_json(back).dump() == synth_spec_to_json(spec).dump());
  CHECK(back.sources.size() == 5);
  CHECK(back.seed == 42);
}

TEST_CASE("recovery scoring") {
  auto spec = default_synth_spec(1);
  spec.length = 2000;
  const auto g = generate(spec);
  const auto perfect = score_recovery(g.truth, g.truth.any());
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.precision == 1.0);
  const auto none = score_recovery(g.truth, std::vector<bool>(2000, false));
  CHECK(none.recall == 0.0);
  CHECK(none.get(AnomalyType::kCorrbreak).hits == 0);
  const auto all = score_recovery(g.truth, std::vector<bool>(2000, true));
  CHECK(all.recall == 1.0);
  const auto any = g.truth.any();
  const auto n_true = std::count(any.begin(), any.end(), true);
  CHECK(all.precision == doctest::Approx(static_cast<double>(n_true) / 2000.0));
  CHECK(multien::test::error_code([&] { score_recovery(g.truth, std::vector<bool>(5, false)); }) ==
        ErrorCode::kLengthMismatch);
}

TEST_CASE("truth file round trip") {
  auto spec = default_synth_spec(2);
  spec.length = 1000;
  const auto g = generate(spec);
  const auto path = multien::test::scratch_dir("truth") / "truth.csv";
  save_truth(path, g);
  const auto back = load_truth(path);
  CHECK(back.type == g.truth.type);
}

TEST_CASE("labeling recovers correlation breaks the individual rule misses") {
  auto spec = default_synth_spec(3);
  const auto g = generate(spec);
  const auto m = correlation_matrix(g.table);
  const auto r = label_dataset(g.table, partition_sources(m, 0.2), m);
  const auto pair = score_recovery(g.truth, r.labels.pairwise_union());
  const auto ind = score_recovery(g.truth, r.labels.individual_union());
  CHECK(pair.get(AnomalyType::kCorrbreak).recall >= 0.8);
  CHECK(ind.get(AnomalyType::kCorrbreak).recall <= 0.1);
  CHECK(ind.get(AnomalyType::kIndividual).recall >= 0.8);
}

}  // TEST_SUITE
