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

#include "multien/run_config.hpp"

#include "multien/error.hpp"
#include "multien/hash.hpp"

namespace multien {
namespace {

template <typename Fn>
void each_key(const Json& j, std::string_view section, Fn&& fn) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidConfig,
                "config section '" + std::string(section) + "' must be an object");
  }
  for (const auto& [key, v] : j.items()) {
    if (!fn(key, v)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" +
                                                 std::string(section) + "." + key + "'");
    }
  }
}

void validate(const RunConfig& cfg) {
  if (cfg.seq_len < 1) throw Error(ErrorCode::kInvalidConfig, "seq_len must be >= 1");
  if (!(cfg.split.train_fraction > 0.0 && cfg.split.train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "split.train_fraction must lie in (0, 1)");
  }
  if (!(cfg.threshold.holdout_fraction > 0.0 && cfg.threshold.holdout_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "threshold.holdout_fraction must lie in (0, 1)");
  }
  if (!(cfg.threshold.value >= 0.0 && cfg.threshold.value <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "threshold.value must lie in [0, 1]");
  }
  if (!(cfg.planner.correlation_threshold >= -1.0 &&
        cfg.planner.correlation_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "planner.correlation_threshold must lie in [-1, 1]");
  }
  if (cfg.attribution.n_perms < 1 || cfg.attribution.background_rows < 1 ||
      cfg.attribution.explained_rows < 1) {
    throw Error(ErrorCode::kInvalidConfig, "attribution counts must be positive");
  }
}

}  // namespace

std::string_view to_string(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::kSweep: return "sweep";
    case ThresholdMode::kFixed: return "fixed";
    case ThresholdMode::kHoldout: return "holdout";
  }
  return "sweep";
}

ThresholdMode threshold_mode_from_string(std::string_view name) {
  if (name == "sweep") return ThresholdMode::kSweep;
  if (name == "fixed") return ThresholdMode::kFixed;
  if (name == "holdout") return ThresholdMode::kHoldout;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown threshold mode '" + std::string(name) + "'");
}

Json run_config_to_json(const RunConfig& cfg) {
  return Json{
      {"extractor", extractor_config_to_json(cfg.extractor)},
      {"classifier", boost_config_to_json(cfg.classifier)},
      {"split", {{"train_fraction", cfg.split.train_fraction}}},
      {"labeling",
       {{"mode", to_string(cfg.labeling.rule)}, {"two_sided", cfg.labeling.two_sided}}},
      {"planner",
       {{"correlation_threshold", cfg.planner.correlation_threshold},
        {"use_absolute", cfg.planner.use_absolute},
        {"average", to_string(cfg.planner.average)}}},
      {"window",
       {{"seq_len", cfg.seq_len},
        {"rule", to_string(cfg.window_rule)},
        {"exclude_any_overlap", cfg.exclude_any_overlap}}},
      {"threshold",
       {{"mode", to_string(cfg.threshold.mode)},
        {"value", cfg.threshold.value},
        {"holdout_fraction", cfg.threshold.holdout_fraction}}},
      {"attribution",
       {{"n_perms", cfg.attribution.n_perms},
        {"background_rows", cfg.attribution.background_rows},
        {"explained_rows", cfg.attribution.explained_rows},
        {"seed", cfg.attribution.seed}}}};
}

RunConfig run_config_from_json(const Json& j, RunConfig cfg) {
  try {
    each_key(j, "config", [&](const std::string& section, const Json& v) {
      if (section == "extractor") {
        cfg.extractor = extractor_config_from_json(v, cfg.extractor);
      } else if (section == "classifier") {
        cfg.classifier = boost_config_from_json(v, cfg.classifier);
      } else if (section == "split") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k != "train_fraction") return false;
          cfg.split.train_fraction = x.get<double>();
          return true;
        });
      } else if (section == "labeling") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k == "mode") cfg.labeling.rule = individual_rule_from_string(x.get<std::string>());
          else if (k == "two_sided") cfg.labeling.two_sided = x.get<bool>();
          else return false;
          return true;
        });
      } else if (section == "planner") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k == "correlation_threshold") cfg.planner.correlation_threshold = x.get<double>();
          else if (k == "use_absolute") cfg.planner.use_absolute = x.get<bool>();
          else if (k == "average") cfg.planner.average = average_mode_from_string(x.get<std::string>());
          else return false;
          return true;
        });
      } else if (section == "window") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k == "seq_len") cfg.seq_len = x.get<std::size_t>();
          else if (k == "rule") cfg.window_rule = window_rule_from_string(x.get<std::string>());
          else if (k == "exclude_any_overlap") cfg.exclude_any_overlap = x.get<bool>();
          else return false;
          return true;
        });
      } else if (section == "threshold") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k == "mode") cfg.threshold.mode = threshold_mode_from_string(x.get<std::string>());
          else if (k == "value") cfg.threshold.value = x.get<double>();
          else if (k == "holdout_fraction") cfg.threshold.holdout_fraction = x.get<double>();
          else return false;
          return true;
        });
      } else if (section == "attribution") {
        each_key(v, section, [&](const std::string& k, const Json& x) {
          if (k == "n_perms") cfg.attribution.n_perms = x.get<std::size_t>();
          else if (k == "background_rows") cfg.attribution.background_rows = x.get<std::size_t>();
          else if (k == "explained_rows") cfg.attribution.explained_rows = x.get<std::size_t>();
          else if (k == "seed") cfg.attribution.seed = x.get<std::uint64_t>();
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig, std::string("bad run config: ") + ex.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig,
                "cannot parse " + path.string() + ": " + ex.what());
  }
  return run_config_from_json(j);
}

RunConfig apply_override(const RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq ||
      dot == 0 || dot + 1 == eq) {
    throw Error(ErrorCode::kInvalidConfig, "override must look like section.key=value, got '" +
                                               std::string(assignment) + "'");
  }
  const std::string section(assignment.substr(0, dot));
  const std::string key(assignment.substr(dot + 1, eq - dot - 1));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json j = run_config_to_json(cfg);
  if (!j.contains(section)) {
    throw Error(ErrorCode::kInvalidConfig, "unknown config section '" + section + "'");
  }
  j[section][key] = value;
  return run_config_from_json(j);
}

void set_all_seeds(RunConfig& cfg, std::uint64_t seed) {
  cfg.extractor.rng_seed = seed;
  cfg.classifier.rng_seed = seed;
  cfg.attribution.seed = seed;
}

DetectorConfig to_detector_config(const RunConfig& cfg, unsigned threads) {
  DetectorConfig d;
  d.extractor = cfg.extractor;
  d.classifier = cfg.classifier;
  d.split = cfg.split;
  d.seq_len = cfg.seq_len;
  d.window_rule = cfg.window_rule;
  d.exclude_any_overlap = cfg.exclude_any_overlap;
  d.threads = threads;
  return d;
}

std::string config_hash(const RunConfig& cfg) {
  return sha256_hex(run_config_to_json(cfg).dump());
}

}  // namespace multien
