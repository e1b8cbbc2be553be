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

#include "multien/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "multien/error.hpp"
#include "multien/hash.hpp"

namespace multien {
namespace {

constexpr int kBundleVersion = 1;

std::string extractor_file(const std::string& group_id) {
  std::string name = group_id;
  std::replace(name.begin(), name.end(), ':', '_');
  return "extractor_" + name + ".bin";
}

void check_labels(const TimeSeriesTable& table, const AnomalyLabels& labels) {
  if (labels.length() != table.rows()) {
    throw Error(ErrorCode::kLengthMismatch,
                "labels cover " + std::to_string(labels.length()) +
                    " timestamps but the table has " + std::to_string(table.rows()));
  }
}

std::vector<SourceId> detector_sources(const std::vector<DetectorGroup>& groups) {
  std::vector<SourceId> out;
  for (const auto& g : groups) {
    for (const auto& s : g.sources) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
  }
  return out;
}

template <typename Fn>
void run_indexed(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers =
      std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Json groups_to_json(const std::vector<DetectorGroup>& groups,
                    const std::vector<FeatureSpan>& layout,
                    const std::vector<TrainedExtractor>& extractors) {
  Json out = Json::array();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    out.push_back({{"id", groups[k].id},
                   {"sources", to_names(groups[k].sources)},
                   {"kind", to_string(groups[k].kind)},
                   {"file", extractor_file(groups[k].id)},
                   {"seed", extractors[k].config().rng_seed},
                   {"feature_begin", layout[k].begin},
                   {"feature_end", layout[k].end}});
  }
  return out;
}

DetectorConfig detector_config_from_json(const Json& j) {
  DetectorConfig cfg;
  cfg.extractor = extractor_config_from_json(j.at("extractor"));
  cfg.classifier = boost_config_from_json(j.at("classifier"));
  cfg.split.train_fraction = j.at("split").at("train_fraction").get<double>();
  cfg.seq_len = j.at("seq_len").get<std::size_t>();
  cfg.window_rule = window_rule_from_string(j.at("window_rule").get<std::string>());
  cfg.exclude_any_overlap = j.at("exclude_any_overlap").get<bool>();
  return cfg;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kProposed: return "proposed";
    case Architecture::kEarlyAll: return "early_all";
    case Architecture::kLateAll: return "late_all";
    case Architecture::kFlatUsad: return "flat_usad";
    case Architecture::kFlatLstmAe: return "flat_lstm_ae";
  }
  return "proposed";
}

Architecture architecture_from_string(std::string_view name) {
  for (auto a : {Architecture::kProposed, Architecture::kEarlyAll,
                 Architecture::kLateAll, Architecture::kFlatUsad,
                 Architecture::kFlatLstmAe}) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "unknown architecture '" + std::string(name) + "'");
}

std::vector<Architecture> baseline_architectures() {
  return {Architecture::kEarlyAll, Architecture::kLateAll, Architecture::kFlatUsad,
          Architecture::kFlatLstmAe};
}

Json detector_config_to_json(const DetectorConfig& cfg) {
  return Json{{"extractor", extractor_config_to_json(cfg.extractor)},
              {"classifier", boost_config_to_json(cfg.classifier)},
              {"split",
               {{"train_fraction", cfg.split.train_fraction},
                {"style", "chronological"}}},
              {"seq_len", cfg.seq_len},
              {"window_rule", to_string(cfg.window_rule)},
              {"exclude_any_overlap", cfg.exclude_any_overlap}};
}

std::vector<DetectorGroup> architecture_groups(Architecture arch,
                                               const FusionPlan& plan,
                                               ExtractorKind base_kind) {
  std::vector<DetectorGroup> groups;
  const auto all = plan.all_sources();
  switch (arch) {
    case Architecture::kProposed:
      if (!plan.early.empty()) groups.push_back({"early", plan.early, base_kind});
      for (const auto& s : plan.late) groups.push_back({"late:" + s.str(), {s}, base_kind});
      for (const auto& s : plan.non_correlated) {
        groups.push_back({"nc:" + s.str(), {s}, base_kind});
      }
      break;
    case Architecture::kEarlyAll:
      groups.push_back({"early_all", all, base_kind});
      break;
    case Architecture::kLateAll:
      for (const auto& s : all) groups.push_back({"late:" + s.str(), {s}, base_kind});
      break;
    case Architecture::kFlatUsad:
      groups.push_back({"flat", all, ExtractorKind::kUsad});
      break;
    case Architecture::kFlatLstmAe:
      groups.push_back({"flat", all, ExtractorKind::kLstmAe});
      break;
  }
  if (groups.empty()) {
    throw Error(ErrorCode::kPlanMismatch, "architecture has no feature groups");
  }
  return groups;
}

std::uint64_t group_seed(std::uint64_t base, const std::string& group_id) {
  // FNV-1a over the id, mixed with the base seed.
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : group_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return base ^ h;
}

std::size_t split_row(std::size_t rows, const SplitSpec& split) {
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "train_fraction must lie in (0, 1)");
  }
  return static_cast<std::size_t>(
      std::floor(split.train_fraction * static_cast<double>(rows)));
}

AssembledFeatures assemble_features(const std::vector<DetectorGroup>& groups,
                                    const std::vector<TrainedExtractor>& extractors,
                                    const TimeSeriesTable& table,
                                    std::size_t seq_len) {
  if (groups.size() != extractors.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one extractor per group is required");
  }
  AssembledFeatures out;
  std::vector<FeatureMatrix> parts;
  std::size_t width = 0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (const auto& s : groups[k].sources) {
      if (!table.index_of(s)) {
        throw Error(ErrorCode::kPlanMismatch,
                    "table lacks source '" + s.str() + "' used by group " + groups[k].id);
      }
    }
    const WindowBatch batch = make_windows(table, groups[k].sources, seq_len);
    parts.push_back(extractors[k].encode(batch));
    const auto w = static_cast<std::size_t>(parts.back().cols());
    out.layout.push_back({groups[k].id, width, width + w});
    width += w;
  }
  const Eigen::Index rows = parts.front().rows();
  out.features.resize(rows, static_cast<Eigen::Index>(width));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    out.features.middleCols(static_cast<Eigen::Index>(out.layout[k].begin),
                            parts[k].cols()) = parts[k];
  }
  return out;
}

TrainedDetector train_detector(const TimeSeriesTable& table,
                               const AnomalyLabels& labels,
                               const FusionPlan& plan, Architecture arch,
                               const DetectorConfig& cfg) {
  check_labels(table, labels);
  check_plan_covers(plan, table.sources());
  const std::size_t seq = cfg.seq_len;
  const std::size_t split = split_row(table.rows(), cfg.split);
  if (split < seq || split >= table.rows()) {
    throw Error(ErrorCode::kTooShort,
                "split leaves no complete training window or no test rows");
  }
  TrainedDetector det;
  det.architecture = arch;
  det.plan = plan;
  det.config = cfg;
  det.split_row = split;
  det.training_rows = table.rows();
  det.groups = architecture_groups(arch, plan, cfg.extractor.kind);

  const auto sources = detector_sources(det.groups);
  const TimeSeriesTable train_rows = table.select(sources).rows_between({0, split});
  det.scaling = fit_minmax(train_rows, {0, split});
  const TimeSeriesTable scaled = apply_minmax(train_rows, det.scaling);

  const std::size_t n_train = split - seq + 1;
  const std::vector<bool> point_labels(labels.final.begin(),
                                       labels.final.begin() + static_cast<std::ptrdiff_t>(split));
  const auto wl = window_labels(point_labels, seq, cfg.window_rule);
  const auto wl_any = window_labels(point_labels, seq, WindowRule::kAny);
  if (std::none_of(wl.begin(), wl.end(), [](bool b) { return b; }) ||
      std::all_of(wl.begin(), wl.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::kSingleClass,
                "training split has windows of only one class; the classifier needs "
                "both (adjust train_fraction or the labeling)");
  }
  std::vector<std::size_t> normal;
  for (std::size_t k = 0; k < n_train; ++k) {
    if (!wl[k] && !(cfg.exclude_any_overlap && wl_any[k])) normal.push_back(k);
  }

  det.extractors.resize(det.groups.size());
  run_indexed(det.groups.size(), cfg.threads, [&](std::size_t k) {
    const auto& g = det.groups[k];
    ExtractorConfig ecfg = cfg.extractor;
    ecfg.kind = g.kind;
    ecfg.rng_seed = group_seed(cfg.extractor.rng_seed, g.id);
    const WindowBatch all = make_windows(scaled, g.sources, seq);
    det.extractors[k] = train_extractor(all.select(normal), ecfg);
  });

  AssembledFeatures feats = assemble_features(det.groups, det.extractors, scaled, seq);
  det.layout = feats.layout;
  det.classifier = train_boost(feats.features, wl, cfg.classifier);
  det.train_scores = predict_proba(det.classifier, feats.features);
  return det;
}

std::map<std::string, TrainedDetector> build_baselines(const TimeSeriesTable& table,
                                                       const AnomalyLabels& labels,
                                                       const FusionPlan& plan,
                                                       const DetectorConfig& cfg) {
  std::map<std::string, TrainedDetector> out;
  for (const auto arch : baseline_architectures()) {
    out.emplace(std::string(to_string(arch)),
                train_detector(table, labels, plan, arch, cfg));
  }
  return out;
}

AssembledFeatures detector_features(const TrainedDetector& detector,
                                    const TimeSeriesTable& table) {
  const auto sources = detector_sources(detector.groups);
  for (const auto& s : sources) {
    if (!table.index_of(s)) {
      throw Error(ErrorCode::kShapeMismatch,
                  "table lacks source '" + s.str() + "' required by the detector");
    }
  }
  const TimeSeriesTable scaled = apply_minmax(table.select(sources), detector.scaling);
  AssembledFeatures f =
      assemble_features(detector.groups, detector.extractors, scaled, detector.config.seq_len);
  if (f.layout != detector.layout) {
    throw Error(ErrorCode::kShapeMismatch, "feature layout differs from training");
  }
  return f;
}

std::vector<double> score(const TrainedDetector& detector,
                          const TimeSeriesTable& table) {
  return predict_proba(detector.classifier, detector_features(detector, table).features);
}

SplitScores test_scores(const TrainedDetector& detector,
                        const TimeSeriesTable& table,
                        const AnomalyLabels& labels) {
  check_labels(table, labels);
  const std::size_t seq = detector.config.seq_len;
  const auto all = score(detector, table);
  const auto wl = window_labels(labels.final, seq, detector.config.window_rule);
  SplitScores out;
  out.first_window = detector.split_row >= seq ? detector.split_row - seq + 1 : 0;
  for (std::size_t k = out.first_window; k < all.size(); ++k) {
    out.scores.push_back(all[k]);
    out.labels.push_back(wl[k]);
  }
  return out;
}

EvalReport evaluate_detector(const TrainedDetector& detector,
                             const TimeSeriesTable& table,
                             const AnomalyLabels& labels) {
  const auto s = test_scores(detector, table, labels);
  return best_threshold_sweep(s.scores, s.labels);
}

namespace {

std::vector<std::pair<std::string, std::string>> bundle_files(
    const TrainedDetector& detector) {
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("plan.json", plan_to_json(detector.plan).dump(2) + "\n");
  files.emplace_back("scaling.json", scaling_to_json(detector.scaling).dump(2) + "\n");
  for (std::size_t k = 0; k < detector.groups.size(); ++k) {
    files.emplace_back(extractor_file(detector.groups[k].id),
                       detector.extractors[k].serialize());
  }
  files.emplace_back("classifier.json", boost_to_json(detector.classifier).dump() + "\n");
  return files;
}

}  // namespace

std::string detector_bytes(const TrainedDetector& detector) {
  std::string out;
  for (const auto& [name, data] : bundle_files(detector)) {
    out += name;
    out.push_back('\0');
    out += std::to_string(data.size());
    out.push_back('\0');
    out += data;
  }
  return out;
}

void save_bundle(const std::filesystem::path& dir, const TrainedDetector& detector,
                 const Json& extra_manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  Json hashes = Json::object();
  for (const auto& [name, data] : bundle_files(detector)) {
    write_file(dir / name, data);
    hashes[name] = sha256_hex(data);
  }
  Json manifest{{"format", "multien-detector"},
                {"version", kBundleVersion},
                {"tool_version", kToolVersion},
                {"architecture", to_string(detector.architecture)},
                {"config", detector_config_to_json(detector.config)},
                {"split_row", detector.split_row},
                {"training_rows", detector.training_rows},
                {"groups", groups_to_json(detector.groups, detector.layout,
                                          detector.extractors)},
                {"files", hashes}};
  for (const auto& [key, v] : extra_manifest.items()) manifest[key] = v;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

TrainedDetector load_bundle(const std::filesystem::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad bundle manifest: ") + ex.what());
  }
  try {
    if (manifest.at("format").get<std::string>() != "multien-detector" ||
        manifest.at("version").get<int>() != kBundleVersion) {
      throw Error(ErrorCode::kParseError, "unsupported detector bundle");
    }
    const auto& hashes = manifest.at("files");
    auto read_checked = [&](const std::string& name) {
      const std::string data = read_file(dir / name);
      if (sha256_hex(data) != hashes.at(name).get<std::string>()) {
        throw Error(ErrorCode::kParseError, "bundle file " + name + " fails its hash check");
      }
      return data;
    };
    TrainedDetector det;
    det.architecture = architecture_from_string(manifest.at("architecture").get<std::string>());
    det.config = detector_config_from_json(manifest.at("config"));
    det.split_row = manifest.at("split_row").get<std::size_t>();
    det.training_rows = manifest.at("training_rows").get<std::size_t>();
    det.plan = plan_from_json(Json::parse(read_checked("plan.json")));
    det.scaling = scaling_from_json(Json::parse(read_checked("scaling.json")));
    det.classifier = boost_from_json(Json::parse(read_checked("classifier.json")));
    for (const auto& g : manifest.at("groups")) {
      DetectorGroup group{g.at("id").get<std::string>(),
                          to_source_ids(g.at("sources").get<std::vector<std::string>>()),
                          extractor_kind_from_string(g.at("kind").get<std::string>())};
      det.extractors.push_back(
          TrainedExtractor::deserialize(read_checked(g.at("file").get<std::string>())));
      det.layout.push_back({group.id, g.at("feature_begin").get<std::size_t>(),
                            g.at("feature_end").get<std::size_t>()});
      if (det.extractors.back().channel_sources() != group.sources) {
        throw Error(ErrorCode::kShapeMismatch,
                    "extractor channels differ from group " + group.id);
      }
      det.groups.push_back(std::move(group));
    }
    if (det.layout.empty() || det.layout.back().end != det.classifier.n_features) {
      throw Error(ErrorCode::kShapeMismatch, "feature layout does not match the classifier");
    }
    return det;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad bundle manifest: ") + ex.what());
  }
}

}  // namespace multien
