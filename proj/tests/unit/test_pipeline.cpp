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
#include <fstream>

#include "multien/error.hpp"
#include "multien/pipeline.hpp"
#include "multien/synthgen.hpp"
#include "support.hpp"

using namespace multien;

namespace {

struct Fixture {
  TimeSeriesTable table;
  AnomalyLabels labels;
  FusionPlan plan;
};

Fixture make_fixture(std::uint64_t seed, std::size_t length = 1500) {
  auto spec = default_synth_spec(seed);
  spec.length = length;
  const auto g = generate(spec);
  const auto m = correlation_matrix(g.table);
  const auto part = partition_sources(m, kDefaultCorrelationThreshold);
  Fixture f{g.table, label_dataset(g.table, part, m).labels, plan_fusion(m, part)};
  return f;
}

DetectorConfig quick_config() {
  DetectorConfig cfg;
  cfg.extractor.kind = ExtractorKind::kDenseAe;
  cfg.extractor.hidden_dim = 8;
  cfg.extractor.latent_dim = 3;
  cfg.extractor.epochs = 4;
  cfg.extractor.batch_size = 128;
  cfg.extractor.rng_seed = 5;
  cfg.classifier.n_estimators = 15;
  return cfg;
}

std::vector<std::string> group_ids(const std::vector<DetectorGroup>& groups) {
  std::vector<std::string> out;
  for (const auto& g : groups) out.push_back(g.id);
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("group layouts per architecture") {
  const auto plan = make_plan(to_source_ids({"a", "b"}), to_source_ids({"d", "c"}), to_source_ids({"e"}));
  CHECK(group_ids(architecture_groups(Architecture::kProposed, plan, ExtractorKind::kUsad)) ==
        std::vector<std::string>{"early", "late:d", "late:c", "nc:e"});
  CHECK(group_ids(architecture_groups(Architecture::kEarlyAll, plan, ExtractorKind::kUsad)) ==
        std::vector<std::string>{"early_all"});
  CHECK(architecture_groups(Architecture::kLateAll, plan, ExtractorKind::kUsad).size() == 5);
  const auto flat = architecture_groups(Architecture::kFlatLstmAe, plan, ExtractorKind::kUsad);
  CHECK(flat.at(0).kind == ExtractorKind::kLstmAe);
  CHECK(flat.at(0).sources.size() == 5);
  CHECK(architecture_groups(Architecture::kFlatUsad, plan, ExtractorKind::kDenseAe).at(0).kind ==
        ExtractorKind::kUsad);
  for (auto a : baseline_architectures()) CHECK(architecture_from_string(to_string(a)) == a);
  CHECK(group_seed(1, "early") != group_seed(1, "late:a"));
  CHECK(group_seed(1, "early") == group_seed(1, "early"));
  CHECK(split_row(1000, {}) == 700);
}

TEST_CASE("feature width follows the groups") {
  const auto f = make_fixture(1);
  auto cfg = quick_config();
  const auto det = train_detector(f.table, f.labels, f.plan, Architecture::kProposed, cfg);
  std::size_t width = 0;
  for (const auto& s : det.layout) {
    CHECK(s.begin == width);
    width = s.end;
    CHECK(s.width() == 4);  // latent 3 plus one error
  }
  CHECK(det.layout.size() == 3);  // early plus two late branches
  CHECK(det.classifier.n_features == width);
}

TEST_CASE("training never looks at the test rows") {
  const auto f = make_fixture(2);
  const auto cfg = quick_config();
  const auto det = train_detector(f.table, f.labels, f.plan, Architecture::kProposed, cfg);

  auto cols = std::vector<std::vector<double>>();
  for (std::size_t c = 0; c < f.table.width(); ++c) {
    auto col = std::vector<double>(f.table.column(c).begin(), f.table.column(c).end());
    for (std::size_t r = det.split_row; r < col.size(); ++r) col[r] = 1e6 * static_cast<double>(r % 7);
    cols.push_back(col);
  }
  const TimeSeriesTable garbage(f.table.start(), f.table.interval(), f.table.sources(), cols, f.table.units());
  auto labels = f.labels;
  for (std::size_t r = det.split_row; r < labels.final.size(); ++r) labels.final[r] = r % 2 == 0;
  const auto det2 = train_detector(garbage, labels, f.plan, Architecture::kProposed, cfg);
  CHECK(detector_bytes(det) == detector_bytes(det2));
  CHECK(det.train_scores == det2.train_scores);
}

TEST_CASE("training is deterministic across thread counts") {
  const auto f = make_fixture(3);
  auto cfg = quick_config();
  const auto a = train_detector(f.table, f.labels, f.plan, Architecture::kLateAll, cfg);
  cfg.threads = 3;
  const auto b = train_detector(f.table, f.labels, f.plan, Architecture::kLateAll, cfg);
  CHECK(detector_bytes(a) == detector_bytes(b));
}

TEST_CASE("replayed training scores match scoring the table") {
  const auto f = make_fixture(4);
  const auto det = train_detector(f.table, f.labels, f.plan, Architecture::kProposed, quick_config());
  const auto all = score(det, f.table);
  CHECK(all.size() == f.table.rows() - det.config.seq_len + 1);
  REQUIRE(det.train_scores.size() == det.split_row - det.config.seq_len + 1);
  for (std::size_t k = 0; k < det.train_scores.size(); ++k) CHECK(all[k] == det.train_scores[k]);

  const auto ts = test_scores(det, f.table, f.labels);
  CHECK(ts.first_window == det.split_row - det.config.seq_len + 1);
  CHECK(ts.scores.size() + ts.first_window == all.size());
  const auto report = evaluate_detector(det, f.table, f.labels);
  CHECK((report.f1 >= 0.0 && report.f1 <= 1.0));
}

TEST_CASE("bundle round trip and hash check") {
  const auto f = make_fixture(5);
  const auto det = train_detector(f.table, f.labels, f.plan, Architecture::kProposed, quick_config());
  const auto dir = multien::test::scratch_dir("bundle");
  save_bundle(dir, det, Json{{"note", "x"}});
  const auto back = load_bundle(dir);
  CHECK(detector_bytes(back) == detector_bytes(det));
  CHECK(score(back, f.table) == score(det, f.table));
  CHECK(std::filesystem::exists(dir / "extractor_late_strong_a.bin"));
  {
    std::ofstream out(dir / "classifier.json", std::ios::app);
    out << " ";
  }
  CHECK(multien::test::error_code([&] { load_bundle(dir); }) == ErrorCode::kParseError);
}

TEST_CASE("scoring matches sources by name") {
  const auto f = make_fixture(6);
  const auto det = train_detector(f.table, f.labels, f.plan, Architecture::kProposed, quick_config());
  auto names = to_names(f.table.sources());
  std::reverse(names.begin(), names.end());
  const auto shuffled = f.table.select(to_source_ids(names));
  CHECK(score(det, shuffled) == score(det, f.table));
  const auto missing = f.table.select(to_source_ids({"weak_a", "weak_b"}));
  CHECK_THROWS_AS(score(det, missing), Error);
}

TEST_CASE("bad inputs") {
  const auto f = make_fixture(7);
  auto labels = f.labels;
  labels.final.pop_back();
  CHECK_THROWS_AS(train_detector(f.table, labels, f.plan, Architecture::kProposed, quick_config()), Error);
  const auto wrong = make_plan(to_source_ids({"weak_a", "weak_b"}), {}, {});
  CHECK(multien::test::error_code([&] {
          train_detector(f.table, f.labels, wrong, Architecture::kProposed, quick_config());
        }) == ErrorCode::kPlanMismatch);
  auto none = f.labels;
  std::fill(none.final.begin(), none.final.end(), false);
  CHECK(multien::test::error_code([&] {
          train_detector(f.table, none, f.plan, Architecture::kProposed, quick_config());
        }) == ErrorCode::kSingleClass);
}

}  // TEST_SUITE
