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

#include "multien/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "multien/error.hpp"

namespace multien {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string_view to_string(IndividualRule rule) {
  return rule == IndividualRule::kZScore3 ? "zscore3" : "mean3x";
}

IndividualRule individual_rule_from_string(std::string_view name) {
  if (name == "zscore3") return IndividualRule::kZScore3;
  if (name == "mean3x") return IndividualRule::kMean3x;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown individual rule '" + std::string(name) + "'");
}

std::string_view to_string(WindowRule rule) {
  return rule == WindowRule::kLast ? "last" : "any";
}

WindowRule window_rule_from_string(std::string_view name) {
  if (name == "last") return WindowRule::kLast;
  if (name == "any") return WindowRule::kAny;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown window rule '" + std::string(name) + "'");
}

std::vector<bool> AnomalyLabels::individual_union() const {
  std::vector<bool> out(length(), false);
  for (const auto& v : individual) {
    for (std::size_t i = 0; i < length(); ++i) {
      if (v[i]) out[i] = true;
    }
  }
  return out;
}

std::vector<bool> AnomalyLabels::pairwise_union() const {
  std::vector<bool> out(length(), false);
  for (const auto& p : pairwise) {
    for (std::size_t i = 0; i < length(); ++i) {
      if (p.flags[i]) out[i] = true;
    }
  }
  return out;
}

std::vector<bool> individual_anomalies(std::span<const double> column,
                                       const LabelingOptions& options) {
  if (column.empty()) {
    throw Error(ErrorCode::kTooShort, "individual anomalies: empty column");
  }
  const auto n = static_cast<double>(column.size());
  double mean = 0.0;
  for (double v : column) mean += v;
  mean /= n;
  std::vector<bool> flags(column.size(), false);
  if (options.rule == IndividualRule::kMean3x) {
    const double limit = 3.0 * mean;
    for (std::size_t i = 0; i < column.size(); ++i) {
      flags[i] = column[i] > limit;
    }
    return flags;
  }
  double ss = 0.0;
  for (double v : column) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) {
    log_warning("zero-variance column: no individual anomalies");
    return flags;
  }
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double z = (column[i] - mean) / sd;
    flags[i] = options.two_sided ? std::abs(z) > 3.0 : z > 3.0;
  }
  return flags;
}

std::vector<bool> pairwise_anomalies(std::span<const double> x,
                                     std::span<const double> y) {
  const SimpleRegressionFit fit = fit_simple_regression(x, y);
  std::vector<bool> flags(x.size(), false);
  std::vector<double> d;
  try {
    d = cooks_distance(fit);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kPerfectFit) return flags;
    if (e.code() == ErrorCode::kLeverageOne) {
      log_warning(std::string("pairwise anomalies skipped: ") + e.what());
      return flags;
    }
    throw;
  }
  const double cut = cooks_threshold(x.size(), 1);
  for (std::size_t i = 0; i < d.size(); ++i) flags[i] = d[i] > cut;
  return flags;
}

LabelResult label_dataset(const TimeSeriesTable& table,
                          const SourcePartition& partition,
                          const LabelingOptions& options) {
  return label_dataset(table, partition, correlation_matrix(table), options);
}

LabelResult label_dataset(const TimeSeriesTable& table,
                          const SourcePartition& partition,
                          const CorrelationMatrix& correlations,
                          const LabelingOptions& options) {
  if (table.has_missing()) {
    throw Error(ErrorCode::kParseError,
                "labeling requires a table without missing cells");
  }
  AnomalyLabels labels;
  labels.start = table.start();
  labels.interval = table.interval();
  labels.mode = options.rule;
  labels.sources = table.sources();
  for (std::size_t c = 0; c < table.width(); ++c) {
    labels.individual.push_back(individual_anomalies(table.column(c), options));
  }

  // Pairs among correlated sources whose own coefficient clears the threshold,
  // in table order.
  const auto is_correlated = [&](const SourceId& id) {
    return std::find(partition.correlated.begin(), partition.correlated.end(),
                     id) != partition.correlated.end();
  };
  for (std::size_t i = 0; i < table.width(); ++i) {
    const SourceId& a = table.sources()[i];
    if (!is_correlated(a)) continue;
    for (std::size_t j = i + 1; j < table.width(); ++j) {
      const SourceId& b = table.sources()[j];
      if (!is_correlated(b)) continue;
      const double r = association(correlations, correlations.index(a),
                                   correlations.index(b),
                                   partition.use_absolute);
      if (!(r > partition.threshold)) continue;
      auto x = table.column(i);
      auto y = table.column(j);
      labels.pairwise.push_back({a, b, pairwise_anomalies(x, y)});
      labels.pairwise.push_back({b, a, pairwise_anomalies(y, x)});
    }
  }

  labels.final.assign(table.rows(), false);
  const auto a = labels.individual_union();
  const auto b = labels.pairwise_union();
  for (std::size_t t = 0; t < table.rows(); ++t) labels.final[t] = a[t] || b[t];
  LabelResult result{std::move(labels), {}};
  result.report = make_report(result.labels);
  return result;
}

LabelReport make_report(const AnomalyLabels& labels) {
  const auto a = labels.individual_union();
  const auto b = labels.pairwise_union();
  LabelReport r;
  r.length = labels.length();
  for (std::size_t t = 0; t < r.length; ++t) {
    r.individual_count += a[t];
    r.correlation_count += b[t];
    r.intersection_count += a[t] && b[t];
    r.individual_only_count += a[t] && !b[t];
    r.correlation_only_count += b[t] && !a[t];
    r.final_count += labels.final[t];
  }
  if (r.length > 0) {
    const auto n = static_cast<double>(r.length);
    r.individual = static_cast<double>(r.individual_count) / n;
    r.correlation = static_cast<double>(r.correlation_count) / n;
    r.intersection = static_cast<double>(r.intersection_count) / n;
    r.individual_only = static_cast<double>(r.individual_only_count) / n;
    r.correlation_only = static_cast<double>(r.correlation_only_count) / n;
    r.final_ratio = static_cast<double>(r.final_count) / n;
  }
  return r;
}

std::vector<bool> window_labels(const std::vector<bool>& point_labels,
                                std::size_t seq_len, WindowRule rule) {
  if (seq_len < 1 || point_labels.size() < seq_len) {
    throw Error(ErrorCode::kTooShort, "fewer points than the sequence length");
  }
  const std::size_t windows = point_labels.size() - seq_len + 1;
  std::vector<bool> out(windows, false);
  if (rule == WindowRule::kLast) {
    for (std::size_t k = 0; k < windows; ++k) {
      out[k] = point_labels[k + seq_len - 1];
    }
    return out;
  }
  std::size_t inside = 0;
  for (std::size_t t = 0; t < point_labels.size(); ++t) {
    inside += point_labels[t];
    if (t >= seq_len) inside -= point_labels[t - seq_len];
    if (t + 1 >= seq_len) out[t + 1 - seq_len] = inside > 0;
  }
  return out;
}

std::vector<bool> window_labels(const AnomalyLabels& labels,
                                std::size_t seq_len, WindowRule rule) {
  return window_labels(labels.final, seq_len, rule);
}

void write_labels_csv(std::ostream& out, const AnomalyLabels& labels) {
  out << "timestamp,final";
  for (const auto& s : labels.sources) out << ',' << s.str() << "_ind";
  for (const auto& p : labels.pairwise) {
    out << ',' << p.predictor.str() << "__" << p.response.str() << "_pair";
  }
  out << '\n';
  for (std::size_t t = 0; t < labels.length(); ++t) {
    out << format_timestamp(labels.start +
                            static_cast<std::int64_t>(t) * labels.interval)
        << ',' << (labels.final[t] ? 1 : 0);
    for (const auto& v : labels.individual) out << ',' << (v[t] ? 1 : 0);
    for (const auto& p : labels.pairwise) out << ',' << (p.flags[t] ? 1 : 0);
    out << '\n';
  }
}

void save_labels(const std::filesystem::path& path,
                 const AnomalyLabels& labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  write_labels_csv(out, labels);
}

AnomalyLabels load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, "empty labels file");
  }
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      header.push_back(field);
    }
  }
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "final") {
    throw Error(ErrorCode::kParseError,
                "labels header must start with 'timestamp,final'");
  }
  AnomalyLabels labels;
  enum class Kind { kInd, kPair };
  std::vector<std::pair<Kind, std::size_t>> columns;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (ends_with(h, "_pair")) {
      const std::string body = h.substr(0, h.size() - 5);
      const auto sep = body.find("__");
      if (sep == std::string::npos) {
        throw Error(ErrorCode::kParseError, "bad pair column '" + h + "'");
      }
      columns.emplace_back(Kind::kPair, labels.pairwise.size());
      labels.pairwise.push_back(
          {SourceId(body.substr(0, sep)), SourceId(body.substr(sep + 2)), {}});
    } else if (ends_with(h, "_ind")) {
      columns.emplace_back(Kind::kInd, labels.sources.size());
      labels.sources.emplace_back(h.substr(0, h.size() - 4));
      labels.individual.emplace_back();
    } else {
      throw Error(ErrorCode::kParseError, "unknown labels column '" + h + "'");
    }
  }
  std::vector<Timestamp> stamps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kParseError,
                  "labels line " + std::to_string(line_no) +
                      ": wrong field count");
    }
    auto ts = parse_timestamp(fields[0]);
    if (!ts) {
      throw Error(ErrorCode::kParseError,
                  "labels line " + std::to_string(line_no) + ": bad timestamp");
    }
    stamps.push_back(*ts);
    const auto flag = [&](const std::string& f) {
      if (f == "1") return true;
      if (f == "0") return false;
      throw Error(ErrorCode::kParseError,
                  "labels line " + std::to_string(line_no) + ": expected 0/1");
    };
    labels.final.push_back(flag(fields[1]));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const bool v = flag(fields[c + 2]);
      if (columns[c].first == Kind::kInd) {
        labels.individual[columns[c].second].push_back(v);
      } else {
        labels.pairwise[columns[c].second].flags.push_back(v);
      }
    }
  }
  if (stamps.empty()) throw Error(ErrorCode::kParseError, "labels file has no rows");
  labels.start = stamps.front();
  labels.interval = stamps.size() > 1 ? stamps[1] - stamps[0] : kSecondsPerHour;
  return labels;
}

Json report_to_json(const LabelReport& r) {
  Json j;
  j["length"] = r.length;
  j["Individual-based (a)"] = r.individual;
  j["Correlation-based (b)"] = r.correlation;
  j["Intersection of (a) and (b)"] = r.intersection;
  j["(a) - (b)"] = r.individual_only;
  j["(b) - (a)"] = r.correlation_only;
  j["Final ratio"] = r.final_ratio;
  j["counts"] = {{"individual", r.individual_count},
                 {"correlation", r.correlation_count},
                 {"intersection", r.intersection_count},
                 {"individual_only", r.individual_only_count},
                 {"correlation_only", r.correlation_only_count},
                 {"final", r.final_count}};
  return j;
}

}  // namespace multien
