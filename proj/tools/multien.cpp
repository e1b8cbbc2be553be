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

// multien command-line front end. Every stage reads and writes plain files.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "multien/error.hpp"
#include "multien/evaluation.hpp"
#include "multien/hash.hpp"
#include "multien/labeling.hpp"
#include "multien/pipeline.hpp"
#include "multien/planner.hpp"
#include "multien/run_config.hpp"
#include "multien/stats.hpp"
#include "multien/synthgen.hpp"
#include "multien/timeseries.hpp"

namespace fs = std::filesystem;
using namespace multien;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

unsigned effective_threads(const Common& c) {
  if (c.threads) return std::max(1U, *c.threads);
  if (const char* env = std::getenv("MULTIEN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kInvalidConfig, "MULTIEN_THREADS must be a positive integer");
  }
  return 1;
}

RunConfig effective_config(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) set_all_seeds(cfg, *c.seed);
  for (const auto& o : c.overrides) cfg = apply_override(cfg, o);
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Run configuration JSON")
      ->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides,
                  "Override one config field, e.g. --set extractor.latent_dim=16")
      ->take_all();
  app->add_option("--seed", c.seed, "Seed for the extractor, classifier and attribution");
  app->add_option("--threads", c.threads,
                  "Worker threads (default $MULTIEN_THREADS, else 1)");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + ex.what());
  }
}

// Input and output files are recorded by file name so that manifests do not
// depend on where a run happens.
Json hash_files(const std::vector<fs::path>& files) {
  Json out = Json::object();
  for (const auto& f : files) out[f.filename().string()] = sha256_file(f);
  return out;
}

void write_manifest(const fs::path& dir, std::string_view command, const RunConfig* cfg,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, Json extra = Json::object()) {
  Json m{{"format", "multien-run"},
         {"tool_version", kToolVersion},
         {"command", command}};
  if (cfg) {
    m["config"] = run_config_to_json(*cfg);
    m["config_hash"] = config_hash(*cfg);
    m["seeds"] = {{"extractor", cfg->extractor.rng_seed},
                  {"classifier", cfg->classifier.rng_seed},
                  {"attribution", cfg->attribution.seed}};
  }
  m["inputs"] = hash_files(inputs);
  m["outputs"] = hash_files(outputs);
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

SourcePartition partition_for(const CorrelationMatrix& m, const RunConfig& cfg) {
  return partition_sources(m, cfg.planner.correlation_threshold, cfg.planner.use_absolute);
}

EvalReport evaluate_scores(const SplitScores& s, const ThresholdConfig& t) {
  switch (t.mode) {
    case ThresholdMode::kSweep:
      return best_threshold_sweep(s.scores, s.labels);
    case ThresholdMode::kHoldout:
      return holdout_threshold_eval(s.scores, s.labels, t.holdout_fraction);
    case ThresholdMode::kFixed:
      break;
  }
  return best_threshold_sweep(s.scores, s.labels, {t.value});
}

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string preset = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> length;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SynthSpec spec;
  std::vector<fs::path> inputs;
  if (!a.spec.empty()) {
    spec = synth_spec_from_json(read_json(a.spec));
    inputs.push_back(a.spec);
  } else if (a.preset == "default") {
    spec = default_synth_spec();
  } else if (a.preset == "five_source") {
    spec = five_source_synth_spec();
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + a.preset + "'");
  }
  if (a.seed) spec.seed = *a.seed;
  if (a.length) spec.length = *a.length;
  const SynthResult res = generate(spec);
  const fs::path dir(a.out);
  ensure_dir(dir);
  save_table(dir / "table.csv", res.table);
  save_truth(dir / "truth.csv", res);
  write_json(dir / "spec.json", synth_spec_to_json(spec));
  Json counts = Json::object();
  for (auto t : {AnomalyType::kIndividual, AnomalyType::kCorrbreak}) {
    const auto m = res.truth.mask(t);
    counts[std::string(to_string(t))] = std::count(m.begin(), m.end(), true);
  }
  write_manifest(dir, "synth", nullptr, inputs,
                 {dir / "table.csv", sidecar_path(dir / "table.csv"), dir / "truth.csv",
                  dir / "spec.json"},
                 {{"seeds", {{"synth", spec.seed}}},
                  {"truth_counts", counts},
                  {"clipped_cells", res.clipped_cells}});
  return kExitOk;
}

// ---- ingest --------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string out;
  std::string timestamp_column = "timestamp";
  std::vector<std::string> columns;
  std::vector<std::string> units;
  std::string from, to;
};

std::pair<std::string, std::string> split_assign(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw Error(ErrorCode::kInvalidConfig, "expected a=b, got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int cmd_ingest(const IngestArgs& a) {
  CsvSchema schema;
  schema.timestamp_column = a.timestamp_column;
  for (const auto& c : a.columns) schema.columns.push_back(split_assign(c));
  for (const auto& u : a.units) schema.units.push_back(split_assign(u));
  const TimeSeriesTable raw = ingest_csv(a.input, schema);
  TimeSeriesTable table = preprocess(raw);
  if (!a.from.empty() || !a.to.empty()) {
    const auto from = a.from.empty() ? std::optional<Timestamp>(table.start())
                                     : parse_timestamp(a.from);
    const auto to = a.to.empty()
                        ? std::optional<Timestamp>(table.timestamp(table.rows() - 1) + 1)
                        : parse_timestamp(a.to);
    if (!from || !to) throw Error(ErrorCode::kInvalidConfig, "bad --from/--to timestamp");
    table = slice_by_date(table, *from, *to);
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  save_table(dir / "table.csv", table);
  Json per_source = Json::object();
  for (std::size_t c = 0; c < raw.width(); ++c) {
    const auto& miss = raw.missing_mask(c);
    const auto& part = table.partial_mask(c);
    per_source[raw.sources()[c].str()] = {
        {"raw_missing", std::count(miss.begin(), miss.end(), true)},
        {"partial_hours", std::count(part.begin(), part.end(), true)}};
  }
  Json report{{"raw_rows", raw.rows()},
              {"raw_interval_seconds", raw.interval()},
              {"rows", table.rows()},
              {"start", format_timestamp(table.start())},
              {"sources", to_names(table.sources())},
              {"per_source", per_source}};
  write_json(dir / "ingest_report.json", report);
  write_manifest(dir, "ingest", nullptr, {a.input},
                 {dir / "table.csv", sidecar_path(dir / "table.csv"),
                  dir / "ingest_report.json"});
  return kExitOk;
}

// ---- label ---------------------------------------------------------------

struct LabelArgs {
  std::string table, truth, out;
};

int cmd_label(const LabelArgs& a, const Common& c) {
  const RunConfig cfg = effective_config(c);
  const TimeSeriesTable table = load_table(a.table);
  const CorrelationMatrix m = correlation_matrix(table);
  const SourcePartition part = partition_for(m, cfg);
  const LabelResult lr = label_dataset(table, part, m, cfg.labeling);
  const fs::path dir(a.out);
  ensure_dir(dir);
  save_labels(dir / "labels.csv", lr.labels);
  Json report = report_to_json(lr.report);
  report["mode"] = to_string(cfg.labeling.rule);
  report["correlated"] = to_names(part.correlated);
  report["non_correlated"] = to_names(part.non_correlated);
  Json individual = Json::object();
  for (std::size_t s = 0; s < lr.labels.sources.size(); ++s) {
    const auto& v = lr.labels.individual[s];
    individual[lr.labels.sources[s].str()] =
        static_cast<double>(std::count(v.begin(), v.end(), true)) /
        static_cast<double>(v.size());
  }
  report["individual_by_source"] = individual;
  Json pairs = Json::array();
  for (const auto& p : lr.labels.pairwise) {
    pairs.push_back({{"predictor", p.predictor.str()},
                     {"response", p.response.str()},
                     {"flags", std::count(p.flags.begin(), p.flags.end(), true)}});
  }
  report["pairs"] = pairs;
  write_json(dir / "label_report.json", report);
  write_json(dir / "correlation.json", correlation_to_json(m));
  std::vector<fs::path> inputs{a.table, sidecar_path(a.table)};
  std::vector<fs::path> outputs{dir / "labels.csv", dir / "label_report.json",
                                dir / "correlation.json"};
  if (!a.truth.empty()) {
    const TruthLabels truth = load_truth(a.truth);
    write_json(dir / "recovery.json", recovery_to_json(score_recovery(truth, lr.labels)));
    inputs.push_back(a.truth);
    outputs.push_back(dir / "recovery.json");
  }
  write_manifest(dir, "label", &cfg, inputs, outputs);
  return kExitOk;
}

// ---- plan ----------------------------------------------------------------

struct PlanArgs {
  std::string table, out;
  std::string early, late, nc;
};

int cmd_plan(const PlanArgs& a, const Common& c) {
  const RunConfig cfg = effective_config(c);
  const TimeSeriesTable table = load_table(a.table);
  const CorrelationMatrix m = correlation_matrix(table);
  FusionPlan plan;
  const bool manual = !a.early.empty() || !a.late.empty() || !a.nc.empty();
  if (manual) {
    plan = make_plan(to_source_ids(split_list(a.early)), to_source_ids(split_list(a.late)),
                     to_source_ids(split_list(a.nc)), cfg.planner.correlation_threshold);
    check_plan_covers(plan, table.sources());
  } else {
    plan = plan_fusion(m, partition_for(m, cfg), PlannerOptions{cfg.planner.average});
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  write_json(dir / "plan.json", plan_to_json(plan));
  std::ostringstream trace;
  trace << "round,candidate,avg_corr,decision\n";
  for (const auto& e : plan.trace) {
    trace << e.round << ',' << e.candidate.str() << ',' << format_double(e.avg_corr) << ','
          << to_string(e.decision) << '\n';
  }
  write_file(dir / "plan_trace.csv", trace.str());
  write_json(dir / "correlation.json", correlation_to_json(m));
  write_manifest(dir, "plan", &cfg, {a.table, sidecar_path(a.table)},
                 {dir / "plan.json", dir / "plan_trace.csv", dir / "correlation.json"},
                 {{"manual", manual}});
  return kExitOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string table, labels, plan, out;
  std::string arch = "proposed";
};

int cmd_train(const TrainArgs& a, const Common& c) {
  const RunConfig cfg = effective_config(c);
  const Architecture arch = architecture_from_string(a.arch);
  const TimeSeriesTable table = load_table(a.table);
  const AnomalyLabels labels = load_labels(a.labels);
  const FusionPlan plan = plan_from_json(read_json(a.plan));
  const TrainedDetector det =
      train_detector(table, labels, plan, arch, to_detector_config(cfg, effective_threads(c)));
  Json extra{{"run_config", run_config_to_json(cfg)},
             {"config_hash", config_hash(cfg)},
             {"seeds",
              {{"extractor", cfg.extractor.rng_seed}, {"classifier", cfg.classifier.rng_seed}}},
             {"inputs", hash_files({a.table, sidecar_path(a.table), a.labels, a.plan})}};
  Json curves = Json::object();
  for (std::size_t k = 0; k < det.groups.size(); ++k) {
    curves[det.groups[k].id] = det.extractors[k].loss_curve();
  }
  extra["loss_curves"] = curves;
  const auto& ll = det.classifier.train_logloss;
  extra["classifier_final_logloss"] = ll.empty() ? 0.0 : ll.back();
  save_bundle(a.out, det, extra);
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string table, labels, out;
  std::vector<std::string> bundles;
  bool holdout = false;
};

// Rows are named by architecture; architectures that repeat fall back to the
// bundle directory name.
std::vector<std::string> bundle_names(const std::vector<TrainedDetector>& dets,
                                      const std::vector<std::string>& dirs) {
  std::map<std::string, int> arch_count;
  for (const auto& d : dets) ++arch_count[std::string(to_string(d.architecture))];
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (std::size_t k = 0; k < dets.size(); ++k) {
    std::string n(to_string(dets[k].architecture));
    if (arch_count[n] > 1) {
      const auto leaf = fs::path(dirs[k]).lexically_normal().filename();
      n = leaf.empty() ? fs::path(dirs[k]).lexically_normal().parent_path().filename().string()
                       : leaf.string();
    }
    const int dup = seen[n]++;
    if (dup > 0) n += "_" + std::to_string(dup + 1);
    names.push_back(n);
  }
  return names;
}

int cmd_eval(const EvalArgs& a, const Common& c) {
  RunConfig cfg = effective_config(c);
  if (a.holdout) cfg.threshold.mode = ThresholdMode::kHoldout;
  const TimeSeriesTable table = load_table(a.table);
  const AnomalyLabels labels = load_labels(a.labels);
  std::vector<TrainedDetector> dets;
  for (const auto& b : a.bundles) dets.push_back(load_bundle(b));
  const auto names = bundle_names(dets, a.bundles);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Json results = Json::array();
  std::ostringstream md, csv;
  md << "| model | AUROC | F1 | M-F1 | W-F1 | threshold |\n"
     << "|---|---|---|---|---|---|\n";
  csv << "model,auroc,f1,macro_f1,weighted_f1,threshold\n";
  std::vector<fs::path> outputs;
  std::vector<fs::path> inputs{a.table, sidecar_path(a.table), a.labels};
  for (std::size_t k = 0; k < dets.size(); ++k) {
    inputs.push_back(fs::path(a.bundles[k]) / "manifest.json");
    const SplitScores s = test_scores(dets[k], table, labels);
    const EvalReport r = evaluate_scores(s, cfg.threshold);
    Json entry = eval_report_to_json(r);
    results.push_back({{"model", names[k]},
                       {"architecture", to_string(dets[k].architecture)},
                       {"report", entry}});
    md << "| " << names[k] << " | " << fmt(r.auroc) << " | " << fmt(r.f1) << " | "
       << fmt(r.macro_f1) << " | " << fmt(r.weighted_f1) << " | " << fmt(r.best_threshold, 2)
       << " |\n";
    csv << names[k] << ',' << format_double(r.auroc) << ',' << format_double(r.f1) << ','
        << format_double(r.macro_f1) << ',' << format_double(r.weighted_f1) << ','
        << format_double(r.best_threshold) << '\n';
    std::ostringstream sc;
    sc << "timestamp,score,label\n";
    const std::size_t seq = dets[k].config.seq_len;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      sc << format_timestamp(table.timestamp(s.first_window + i + seq - 1)) << ','
         << format_double(s.scores[i]) << ',' << (s.labels[i] ? 1 : 0) << '\n';
    }
    const fs::path scores = dir / ("scores_" + names[k] + ".csv");
    write_file(scores, sc.str());
    outputs.push_back(scores);
  }
  write_json(dir / "eval.json",
             {{"threshold_mode", to_string(cfg.threshold.mode)}, {"models", results}});
  write_file(dir / "comparison.md", md.str());
  write_file(dir / "comparison.csv", csv.str());
  outputs.insert(outputs.begin(),
                 {dir / "eval.json", dir / "comparison.md", dir / "comparison.csv"});
  write_manifest(dir, "eval", &cfg, inputs, outputs);
  return kExitOk;
}

// ---- attr ----------------------------------------------------------------

struct AttrArgs {
  std::string table, bundle, out;
};

// `count` rows spread evenly over [begin, end).
Eigen::MatrixXd spread_rows(const Eigen::MatrixXd& m, std::size_t begin, std::size_t end,
                            std::size_t count) {
  const std::size_t n = end - begin;
  count = std::min(count, n);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), m.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = begin + i * n / count;
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

int cmd_attr(const AttrArgs& a, const Common& c) {
  const RunConfig cfg = effective_config(c);
  const TimeSeriesTable table = load_table(a.table);
  const TrainedDetector det = load_bundle(a.bundle);
  const AssembledFeatures f = detector_features(det, table);
  const std::size_t seq = det.config.seq_len;
  const std::size_t first_test = det.split_row >= seq ? det.split_row - seq + 1 : 0;
  const auto n = static_cast<std::size_t>(f.features.rows());
  if (first_test == 0 || first_test >= n) {
    throw Error(ErrorCode::kTooShort, "table has no training or no test windows");
  }
  const Eigen::MatrixXd background =
      spread_rows(f.features, 0, first_test, cfg.attribution.background_rows);
  const Eigen::MatrixXd explained =
      spread_rows(f.features, first_test, n, cfg.attribution.explained_rows);
  const BoostedModel& model = det.classifier;
  ShapleyOptions opt;
  opt.n_perms = cfg.attribution.n_perms;
  opt.seed = cfg.attribution.seed;
  opt.threads = effective_threads(c);
  const AttributionReport rep = shapley_groups(
      [&model](const Eigen::MatrixXd& x) { return predict_proba(model, x); }, explained,
      background, f.layout, opt);
  const fs::path dir(a.out);
  ensure_dir(dir);
  Json j = attribution_to_json(rep);
  j["architecture"] = to_string(det.architecture);
  write_json(dir / "attribution.json", j);
  write_manifest(dir, "attr", &cfg,
                 {a.table, sidecar_path(a.table), fs::path(a.bundle) / "manifest.json"},
                 {dir / "attribution.json"});
  return kExitOk;
}

// ---- report --------------------------------------------------------------

struct ReportArgs {
  std::string table, labels, plan, out;
  std::vector<std::string> evals, attrs;
};

// Parses the score files written by `eval`.
std::vector<std::pair<std::string, std::vector<std::string>>> read_score_file(
    const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 3) throw Error(ErrorCode::kParseError, path.string() + ": bad row");
    rows.push_back({fields[0], {fields[1], fields[2]}});
  }
  return rows;
}

int cmd_report(const ReportArgs& a) {
  const fs::path dir(a.out);
  ensure_dir(dir);
  std::ostringstream md;
  md << "# multien run summary\n\n";
  std::vector<fs::path> inputs, outputs{dir / "summary.md"};
  if (!a.table.empty()) {
    const TimeSeriesTable table = load_table(a.table);
    inputs.insert(inputs.end(), {a.table, sidecar_path(a.table)});
    md << "## Data\n\n" << table.rows() << " hourly rows from "
       << format_timestamp(table.start()) << ", sources: ";
    for (std::size_t i = 0; i < table.width(); ++i) {
      md << (i ? ", " : "") << table.sources()[i].str();
    }
    md << "\n\n";
    const CorrelationMatrix m = correlation_matrix(table);
    md << "### Correlation matrix\n\n|   |";
    for (const auto& s : m.sources()) md << ' ' << s.str() << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < m.size(); ++i) md << "---|";
    md << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
      md << "| " << m.sources()[i].str() << " |";
      for (std::size_t j = 0; j < m.size(); ++j) md << ' ' << fmt(m.at(i, j), 3) << " |";
      md << '\n';
    }
    md << '\n';
    std::ostringstream weekly;
    weekly << "week,source_a,source_b,r\n";
    for (std::size_t i = 0; i < table.width(); ++i) {
      for (std::size_t j = i + 1; j < table.width(); ++j) {
        for (const auto& w : weekly_correlation(table, table.sources()[i], table.sources()[j])) {
          weekly << w.week << ',' << table.sources()[i].str() << ','
                 << table.sources()[j].str() << ','
                 << (w.r ? format_double(*w.r) : std::string()) << '\n';
        }
      }
    }
    write_file(dir / "weekly_correlations.csv", weekly.str());
    outputs.push_back(dir / "weekly_correlations.csv");
  }
  if (!a.labels.empty()) {
    const AnomalyLabels labels = load_labels(a.labels);
    inputs.push_back(a.labels);
    const LabelReport r = make_report(labels);
    md << "## Labels\n\n| row | ratio |\n|---|---|\n"
       << "| individual | " << fmt(100 * r.individual, 2) << "% |\n"
       << "| correlation | " << fmt(100 * r.correlation, 2) << "% |\n"
       << "| intersection | " << fmt(100 * r.intersection, 2) << "% |\n"
       << "| individual only | " << fmt(100 * r.individual_only, 2) << "% |\n"
       << "| correlation only | " << fmt(100 * r.correlation_only, 2) << "% |\n"
       << "| final | " << fmt(100 * r.final_ratio, 2) << "% |\n\n";
  }
  if (!a.plan.empty()) {
    const FusionPlan plan = plan_from_json(read_json(a.plan));
    inputs.push_back(a.plan);
    auto list = [](const std::vector<SourceId>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i].str();
      return s.empty() ? std::string("-") : s;
    };
    md << "## Fusion plan\n\n- early: " << list(plan.early) << "\n- late: " << list(plan.late)
       << "\n- non-correlated: " << list(plan.non_correlated) << "\n\n";
  }
  std::map<std::string, std::map<std::string, std::string>> traces;
  std::map<std::string, std::string> trace_labels;
  std::vector<std::string> trace_models;
  for (const auto& e : a.evals) {
    const fs::path ed(e);
    const Json ev = read_json(ed / "eval.json");
    inputs.push_back(ed / "eval.json");
    md << "## Evaluation (" << ev.at("threshold_mode").get<std::string>() << ")\n\n"
       << read_file(ed / "comparison.md") << '\n';
    for (const auto& m : ev.at("models")) {
      const std::string name = m.at("model").get<std::string>();
      const fs::path sf = ed / ("scores_" + name + ".csv");
      if (!fs::exists(sf)) continue;
      inputs.push_back(sf);
      std::string key = name;
      int k = 2;
      while (traces.count(key)) key = name + "_" + std::to_string(k++);
      trace_models.push_back(key);
      for (const auto& [ts, v] : read_score_file(sf)) {
        traces[key][ts] = v[0];
        trace_labels[ts] = v[1];
      }
    }
  }
  if (!trace_models.empty()) {
    std::ostringstream st;
    st << "timestamp,label";
    for (const auto& m : trace_models) st << ',' << m;
    st << '\n';
    for (const auto& [ts, label] : trace_labels) {
      st << ts << ',' << label;
      for (const auto& m : trace_models) {
        const auto it = traces[m].find(ts);
        st << ',' << (it == traces[m].end() ? std::string() : it->second);
      }
      st << '\n';
    }
    write_file(dir / "score_traces.csv", st.str());
    outputs.push_back(dir / "score_traces.csv");
  }
  for (const auto& at : a.attrs) {
    const fs::path ad(at);
    const Json j = read_json(ad / "attribution.json");
    inputs.push_back(ad / "attribution.json");
    md << "## Attribution";
    if (j.contains("architecture")) md << " (" << j["architecture"].get<std::string>() << ")";
    md << "\n\n| group | mean abs | mean signed | rank |\n|---|---|---|---|\n";
    for (const auto& g : j.at("groups")) {
      md << "| " << g.at("group").get<std::string>() << " | "
         << fmt(g.at("mean_abs_contribution").get<double>()) << " | "
         << fmt(g.at("mean_signed_contribution").get<double>()) << " | " << g.at("rank").get<int>()
         << " |\n";
    }
    md << "\nEfficiency residual " << fmt(j.at("efficiency_residual").get<double>(), 6)
       << " over " << j.at("sampling").at("n_perms").get<int>() << " permutations.\n\n";
  }
  write_file(dir / "summary.md", md.str());
  write_manifest(dir, "report", nullptr, inputs, outputs);
  return kExitOk;
}

int fail(std::string_view code, const std::string& message, int exit_code) {
  std::string one_line = message;
  std::replace(one_line.begin(), one_line.end(), '\n', ' ');
  std::cerr << "MENERR:" << code << ": " << one_line << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  set_warnings_enabled(true);
  CLI::App app{"multien: correlation-driven multi-source energy anomaly detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic multi-source table and truth");
  s->add_option("--spec", synth.spec, "Generator spec JSON")->check(CLI::ExistingFile);
  s->add_option("--preset", synth.preset, "Built-in spec when --spec is absent")
      ->check(CLI::IsMember({"default", "five_source"}));
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--length", synth.length, "Number of hourly rows");
  s->add_option("--out", synth.out, "Output directory")->required();

  IngestArgs ingest;
  auto* in = app.add_subcommand("ingest", "Resample and interpolate a raw CSV");
  in->add_option("--input", ingest.input, "Raw CSV")->required()->check(CLI::ExistingFile);
  in->add_option("--out", ingest.out, "Output directory")->required();
  in->add_option("--timestamp-column", ingest.timestamp_column, "Timestamp column name");
  in->add_option("--column", ingest.columns, "csv_column=source mapping (repeatable)");
  in->add_option("--unit", ingest.units, "source=unit (repeatable)");
  in->add_option("--from", ingest.from, "Keep rows at or after this timestamp");
  in->add_option("--to", ingest.to, "Keep rows before this timestamp");

  LabelArgs label;
  auto* lb = app.add_subcommand("label", "Individual and correlation-based labels");
  lb->add_option("--table", label.table, "Table CSV")->required()->check(CLI::ExistingFile);
  lb->add_option("--truth", label.truth, "truth.csv for recovery scoring")
      ->check(CLI::ExistingFile);
  lb->add_option("--out", label.out, "Output directory")->required();
  add_common(lb, common);

  PlanArgs plan;
  auto* pl = app.add_subcommand("plan", "Correlation-driven fusion plan");
  pl->add_option("--table", plan.table, "Table CSV")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", plan.out, "Output directory")->required();
  pl->add_option("--early", plan.early, "Manual plan: comma-separated early sources");
  pl->add_option("--late", plan.late, "Manual plan: comma-separated late sources");
  pl->add_option("--nc", plan.nc, "Manual plan: comma-separated non-correlated sources");
  add_common(pl, common);

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a detector bundle");
  tr->add_option("--table", train.table, "Table CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--labels", train.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  tr->add_option("--plan", train.plan, "plan.json")->required()->check(CLI::ExistingFile);
  tr->add_option("--arch", train.arch, "Architecture")
      ->check(CLI::IsMember({"proposed", "early_all", "late_all", "flat_usad", "flat_lstm_ae"}));
  tr->add_option("--out", train.out, "Bundle directory")->required();
  add_common(tr, common);

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Evaluate bundles on the test split");
  ev->add_option("--table", eval.table, "Table CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--labels", eval.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  ev->add_option("--bundle", eval.bundles, "Bundle directory (repeatable)")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_flag("--holdout-threshold", eval.holdout,
               "Choose the threshold on the first part of the test windows only");
  ev->add_option("--out", eval.out, "Output directory")->required();
  add_common(ev, common);

  AttrArgs attr;
  auto* at = app.add_subcommand("attr", "Group Shapley attribution of a bundle");
  at->add_option("--table", attr.table, "Table CSV")->required()->check(CLI::ExistingFile);
  at->add_option("--bundle", attr.bundle, "Bundle directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  at->add_option("--out", attr.out, "Output directory")->required();
  add_common(at, common);

  ReportArgs report;
  auto* rp = app.add_subcommand("report", "Merge artifacts into a Markdown summary");
  rp->add_option("--table", report.table, "Table CSV")->check(CLI::ExistingFile);
  rp->add_option("--labels", report.labels, "labels.csv")->check(CLI::ExistingFile);
  rp->add_option("--plan", report.plan, "plan.json")->check(CLI::ExistingFile);
  rp->add_option("--eval", report.evals, "eval output directory (repeatable)")
      ->check(CLI::ExistingDirectory);
  rp->add_option("--attr", report.attrs, "attr output directory (repeatable)")
      ->check(CLI::ExistingDirectory);
  rp->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("Usage", e.what(), kExitUsage);
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*in) return cmd_ingest(ingest);
    if (*lb) return cmd_label(label, common);
    if (*pl) return cmd_plan(plan, common);
    if (*tr) return cmd_train(train, common);
    if (*ev) return cmd_eval(eval, common);
    if (*at) return cmd_attr(attr, common);
    if (*rp) return cmd_report(report);
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::kInvalidConfig ? kExitUsage
                     : is_numeric_failure(e.code())         ? kExitNumeric
                                                            : kExitData;
    return fail(error_code_name(e.code()), e.what(), code);
  } catch (const std::exception& e) {
    return fail("Internal", e.what(), kExitData);
  }
  return kExitUsage;
}
