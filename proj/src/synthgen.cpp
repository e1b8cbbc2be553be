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

#include "multien/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "multien/error.hpp"

namespace multien {
namespace {

constexpr std::size_t kMinLength = 336;
constexpr std::size_t kMaxRejectionFactor = 500;
constexpr int kMaxPlacementPasses = 20;

void spec_error(const std::string& what) {
  throw Error(ErrorCode::kInvalidSpec, what);
}

std::vector<double> make_latent(const SynthSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = spec.length;
  const double phi = spec.seasonal.ar_phi;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> latent(n);
  double ar = normal(rng);
  const double innovation = std::sqrt(1.0 - phi * phi);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) ar = phi * ar + innovation * normal(rng);
    const double h = static_cast<double>(t);
    latent[t] = spec.seasonal.daily_amplitude *
                    std::sin(2.0 * std::numbers::pi * h / 24.0) +
                spec.seasonal.weekly_amplitude *
                    std::sin(2.0 * std::numbers::pi * h / 168.0) +
                ar;
  }
  const double mean = std::accumulate(latent.begin(), latent.end(), 0.0) /
                      static_cast<double>(n);
  double ss = 0.0;
  for (double v : latent) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  for (double& v : latent) v = (v - mean) / sd;
  return latent;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

std::size_t target_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

}  // namespace

double SynthSpec::implied_correlation(std::size_t i, std::size_t j) const {
  const auto& a = sources.at(i);
  const auto& b = sources.at(j);
  const double den = std::sqrt((a.loading * a.loading + a.noise * a.noise) *
                               (b.loading * b.loading + b.noise * b.noise));
  return a.loading * b.loading / den;
}

void validate_spec(const SynthSpec& spec) {
  if (spec.length < kMinLength) {
    spec_error("T must be at least " + std::to_string(kMinLength) + " hours");
  }
  if (spec.sources.size() < 2) spec_error("at least two sources are required");
  std::set<std::string> names;
  for (const auto& s : spec.sources) {
    if (s.name.empty() || s.name == "timestamp") spec_error("invalid source name");
    if (!names.insert(s.name).second) spec_error("duplicate source '" + s.name + "'");
    if (!(s.loading >= 0.0)) spec_error("loading must be >= 0 for '" + s.name + "'");
    if (!(s.noise > 0.0)) spec_error("noise must be > 0 for '" + s.name + "'");
    if (!(s.scale > 0.0) || !std::isfinite(s.offset)) {
      spec_error("scale must be > 0 and offset finite for '" + s.name + "'");
    }
  }
  const auto& ss = spec.seasonal;
  if (!(ss.ar_phi >= 0.0 && ss.ar_phi < 1.0) ||
      !(ss.noise_phi >= 0.0 && ss.noise_phi < 1.0)) {
    spec_error("ar_phi and noise_phi must lie in [0, 1)");
  }
  if (!std::isfinite(ss.daily_amplitude) || !std::isfinite(ss.weekly_amplitude)) {
    spec_error("seasonal amplitudes must be finite");
  }
  const auto& an = spec.anomalies;
  for (double r : {an.rate_individual, an.rate_corrbreak}) {
    if (!(r >= 0.0 && r <= 0.2)) spec_error("anomaly rates must lie in [0, 0.2]");
  }
  if (!(an.spike_min >= 1.0 && an.spike_max >= an.spike_min)) {
    spec_error("spike factor range must satisfy 1 <= min <= max");
  }
  if (!(an.corrbreak_partner_z >= 0.0 && an.corrbreak_shift_z >= 0.0 &&
        an.corrbreak_max_z > std::max(an.corrbreak_partner_z, an.corrbreak_shift_z))) {
    spec_error("corrbreak z bounds must be non-negative and below corrbreak_max_z");
  }
}

SynthSpec synth_spec_from_json(const Json& j) {
  auto reject = [](const Json& obj, std::initializer_list<const char*> allowed,
                   const std::string& where) {
    if (!obj.is_object()) spec_error(where + " must be an object");
    for (const auto& [key, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) spec_error("unknown key '" + key + "' in " + where);
    }
  };
  try {
    reject(j, {"T", "start", "seed", "sources", "seasonal", "anomalies"}, "spec");
    SynthSpec spec;
    spec.length = j.value("T", spec.length);
    if (j.contains("start")) {
      const auto ts = parse_timestamp(j["start"].get<std::string>());
      if (!ts) spec_error("bad start timestamp");
      spec.start = *ts;
    }
    spec.seed = j.value("seed", spec.seed);
    for (const auto& s : j.at("sources")) {
      reject(s, {"name", "loading", "noise", "offset", "scale", "unit"}, "source");
      SynthSource src;
      src.name = s.at("name").get<std::string>();
      src.loading = s.value("loading", src.loading);
      src.noise = s.value("noise", src.noise);
      src.offset = s.value("offset", src.offset);
      src.scale = s.value("scale", src.scale);
      src.unit = s.value("unit", src.unit);
      spec.sources.push_back(src);
    }
    if (j.contains("seasonal")) {
      const auto& s = j["seasonal"];
      reject(s, {"daily_amplitude", "weekly_amplitude", "ar_phi", "noise_phi"},
             "seasonal");
      spec.seasonal.daily_amplitude = s.value("daily_amplitude", spec.seasonal.daily_amplitude);
      spec.seasonal.weekly_amplitude =
          s.value("weekly_amplitude", spec.seasonal.weekly_amplitude);
      spec.seasonal.ar_phi = s.value("ar_phi", spec.seasonal.ar_phi);
      spec.seasonal.noise_phi = s.value("noise_phi", spec.seasonal.noise_phi);
    }
    if (j.contains("anomalies")) {
      const auto& a = j["anomalies"];
      reject(a,
             {"rate_individual", "rate_corrbreak", "spike_factor", "corrbreak_min_rho",
              "corrbreak_partner_z", "corrbreak_shift_z", "corrbreak_max_z"},
             "anomalies");
      auto& an = spec.anomalies;
      an.rate_individual = a.value("rate_individual", an.rate_individual);
      an.rate_corrbreak = a.value("rate_corrbreak", an.rate_corrbreak);
      if (a.contains("spike_factor")) {
        const auto range = a["spike_factor"].get<std::vector<double>>();
        if (range.size() != 2) spec_error("spike_factor must be [min, max]");
        an.spike_min = range[0];
        an.spike_max = range[1];
      }
      an.corrbreak_min_rho = a.value("corrbreak_min_rho", an.corrbreak_min_rho);
      an.corrbreak_partner_z = a.value("corrbreak_partner_z", an.corrbreak_partner_z);
      an.corrbreak_shift_z = a.value("corrbreak_shift_z", an.corrbreak_shift_z);
      an.corrbreak_max_z = a.value("corrbreak_max_z", an.corrbreak_max_z);
    }
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad synth spec: ") + ex.what());
  }
}

Json synth_spec_to_json(const SynthSpec& spec) {
  Json sources = Json::array();
  for (const auto& s : spec.sources) {
    sources.push_back({{"name", s.name},
                       {"loading", s.loading},
                       {"noise", s.noise},
                       {"offset", s.offset},
                       {"scale", s.scale},
                       {"unit", s.unit}});
  }
  const auto& an = spec.anomalies;
  return Json{{"T", spec.length},
              {"start", format_timestamp(spec.start)},
              {"seed", spec.seed},
              {"sources", sources},
              {"seasonal",
               {{"daily_amplitude", spec.seasonal.daily_amplitude},
                {"weekly_amplitude", spec.seasonal.weekly_amplitude},
                {"ar_phi", spec.seasonal.ar_phi},
                {"noise_phi", spec.seasonal.noise_phi}}},
              {"anomalies",
               {{"rate_individual", an.rate_individual},
                {"rate_corrbreak", an.rate_corrbreak},
                {"spike_factor", {an.spike_min, an.spike_max}},
                {"corrbreak_min_rho", an.corrbreak_min_rho},
                {"corrbreak_partner_z", an.corrbreak_partner_z},
                {"corrbreak_shift_z", an.corrbreak_shift_z},
                {"corrbreak_max_z", an.corrbreak_max_z}}}};
}

namespace {

// Loading for a target latent correlation c with unit noise.
double loading_for(double c) { return c / std::sqrt(1.0 - c * c); }

SynthSource make_source(const std::string& name, double c, double offset_sd,
                        double scale) {
  SynthSource s;
  s.name = name;
  s.noise = 1.0;
  s.loading = loading_for(c);
  s.offset = offset_sd * std::sqrt(s.loading * s.loading + 1.0);
  s.scale = scale;
  return s;
}

}  // namespace

SynthSpec default_synth_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.sources = {make_source("weak_a", 0.45, 4.0, 1.0),
                  make_source("weak_b", 0.5, 4.0, 2.0),
                  make_source("strong_a", 0.95, 4.0, 1.5),
                  make_source("strong_b", 0.95, 4.0, 0.5)};
  return spec;
}

SynthSpec five_source_synth_spec(std::uint64_t seed) {
  SynthSpec spec = default_synth_spec(seed);
  SynthSource iso = make_source("isolated", 0.0, 4.0, 1.0);
  spec.sources.push_back(iso);
  return spec;
}

std::string_view to_string(AnomalyType type) {
  switch (type) {
    case AnomalyType::kNone: return "none";
    case AnomalyType::kIndividual: return "individual";
    case AnomalyType::kCorrbreak: return "corrbreak";
  }
  return "none";
}

std::vector<bool> TruthLabels::mask(AnomalyType t) const {
  std::vector<bool> out(type.size());
  for (std::size_t i = 0; i < type.size(); ++i) out[i] = type[i] == t;
  return out;
}

std::vector<bool> TruthLabels::any() const {
  std::vector<bool> out(type.size());
  for (std::size_t i = 0; i < type.size(); ++i) out[i] = type[i] != AnomalyType::kNone;
  return out;
}

SynthResult generate(const SynthSpec& spec) {
  validate_spec(spec);
  const std::size_t n = spec.length;
  const std::size_t m = spec.sources.size();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto latent = make_latent(spec, rng);
  SynthResult result;
  std::vector<std::vector<double>> cols(m, std::vector<double>(n));
  const double nphi = spec.seasonal.noise_phi;
  const double ninnov = std::sqrt(1.0 - nphi * nphi);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& s = spec.sources[i];
    double eps = normal(rng);
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) eps = nphi * eps + ninnov * normal(rng);
      const double raw = s.offset + s.loading * latent[t] + s.noise * eps;
      if (raw < 0.0) ++result.clipped_cells;
      cols[i][t] = s.scale * std::max(0.0, raw);
    }
  }

  std::vector<Moments> clean(m);
  for (std::size_t i = 0; i < m; ++i) clean[i] = moments(cols[i]);

  TruthLabels truth;
  truth.type.assign(n, AnomalyType::kNone);
  truth.source.assign(n, -1);
  truth.partner.assign(n, -1);

  // Individual spikes.
  const auto& an = spec.anomalies;
  const std::size_t n_spikes = target_count(an.rate_individual, n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> spikes;
  std::sample(all.begin(), all.end(), std::back_inserter(spikes), n_spikes, rng);
  std::uniform_int_distribution<std::size_t> pick_source(0, m - 1);
  std::uniform_real_distribution<double> factor(an.spike_min, an.spike_max);
  for (const std::size_t t : spikes) {
    const std::size_t i = pick_source(rng);
    double f = factor(rng);
    // Keep zero-valued cells visible.
    if (cols[i][t] <= 0.0) cols[i][t] = clean[i].mean;
    cols[i][t] *= f;
    truth.type[t] = AnomalyType::kIndividual;
    truth.source[t] = static_cast<int>(i);
  }

  // Correlation breaks on strongly loaded pairs.
  const std::size_t n_breaks = target_count(an.rate_corrbreak, n);
  if (n_breaks > 0) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double best_rho = -1.0;
    std::pair<std::size_t, std::size_t> best_pair{0, 1};
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double rho = spec.implied_correlation(i, j);
        if (rho >= an.corrbreak_min_rho) pairs.emplace_back(i, j);
        if (rho > best_rho) {
          best_rho = rho;
          best_pair = {i, j};
        }
      }
    }
    if (pairs.empty()) pairs.push_back(best_pair);
    // Bounds are checked against the moments of the table being built; they move as
    // breaks land, so violators are undone and re-placed until the final table agrees.
    std::vector<Moments> cur(clean.begin(), clean.end());
    auto z = [&](std::size_t i, std::size_t t) {
      return cur[i].sd > 0.0 ? (cols[i][t] - cur[i].mean) / cur[i].sd : 0.0;
    };
    auto too_extreme = [&](std::size_t i, std::size_t t) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k != i && std::abs(z(k, t)) >= an.corrbreak_max_z) return true;
      }
      return false;
    };
    std::uniform_int_distribution<std::size_t> pick_t(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::size_t> placed_at;
    std::vector<double> original(n, 0.0);
    std::size_t placed = 0;
    std::size_t attempt = 0;
    for (int pass = 0; pass < kMaxPlacementPasses; ++pass) {
      for (; placed < n_breaks && attempt < kMaxRejectionFactor * n_breaks; ++attempt) {
        const std::size_t t = pick_t(rng);
        auto [i, j] = pairs[pick_pair(rng)];
        if (coin(rng)) std::swap(i, j);
        if (truth.type[t] != AnomalyType::kNone) continue;
        if (std::abs(z(i, t)) < an.corrbreak_shift_z ||
            std::abs(z(j, t)) < an.corrbreak_partner_z || too_extreme(i, t)) {
          continue;
        }
        original[t] = cols[i][t];
        cols[i][t] = clean[i].mean;
        truth.type[t] = AnomalyType::kCorrbreak;
        truth.source[t] = static_cast<int>(i);
        truth.partner[t] = static_cast<int>(j);
        placed_at.push_back(t);
        ++placed;
      }
      for (std::size_t i = 0; i < m; ++i) cur[i] = moments(cols[i]);
      std::vector<std::size_t> kept;
      for (const std::size_t t : placed_at) {
        const auto i = static_cast<std::size_t>(truth.source[t]);
        bool bad = std::abs(z(i, t)) >= an.corrbreak_max_z || too_extreme(i, t);
        if (!bad) {
          kept.push_back(t);
          continue;
        }
        cols[i][t] = original[t];
        truth.type[t] = AnomalyType::kNone;
        truth.source[t] = -1;
        truth.partner[t] = -1;
        --placed;
      }
      const bool stable = kept.size() == placed_at.size();
      placed_at = std::move(kept);
      if (stable && placed == n_breaks) break;
      for (std::size_t i = 0; i < m; ++i) cur[i] = moments(cols[i]);
    }
    for (const std::size_t t : placed_at) {
      const auto i = static_cast<std::size_t>(truth.source[t]);
      if (std::abs(z(i, t)) >= an.corrbreak_max_z || too_extreme(i, t)) {
        spec_error("correlation breaks did not settle below corrbreak_max_z");
      }
    }
    if (placed < n_breaks) {
      spec_error("could only place " + std::to_string(placed) + " of " +
                 std::to_string(n_breaks) +
                 " correlation breaks; lower rate_corrbreak or the corrbreak z bounds");
    }
  }

  std::vector<SourceId> ids;
  std::vector<std::string> units;
  for (const auto& s : spec.sources) {
    ids.emplace_back(s.name);
    units.push_back(s.unit);
  }
  result.table = TimeSeriesTable(spec.start, kSecondsPerHour, std::move(ids),
                                 std::move(cols), std::move(units));
  result.truth = std::move(truth);
  return result;
}

const TypeRecovery& RecoveryReport::get(AnomalyType t) const {
  for (const auto& r : by_type) {
    if (r.type == t) return r;
  }
  throw Error(ErrorCode::kInvalidConfig, "no recovery entry for type");
}

RecoveryReport score_recovery(const TruthLabels& truth,
                              const std::vector<bool>& flags) {
  if (flags.size() != truth.length()) {
    throw Error(ErrorCode::kLengthMismatch,
                "labels length " + std::to_string(flags.size()) +
                    " != truth length " + std::to_string(truth.length()));
  }
  std::size_t false_flags = 0, all_truth = 0, all_hits = 0;
  for (std::size_t t = 0; t < flags.size(); ++t) {
    if (truth.type[t] == AnomalyType::kNone) {
      if (flags[t]) ++false_flags;
    } else {
      ++all_truth;
      if (flags[t]) ++all_hits;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  RecoveryReport report;
  for (const auto type : {AnomalyType::kIndividual, AnomalyType::kCorrbreak}) {
    TypeRecovery r;
    r.type = type;
    for (std::size_t t = 0; t < flags.size(); ++t) {
      if (truth.type[t] != type) continue;
      ++r.truth_count;
      if (flags[t]) ++r.hits;
    }
    r.recall = ratio(r.hits, r.truth_count);
    r.precision = ratio(r.hits, r.hits + false_flags);
    report.by_type.push_back(r);
  }
  report.recall = ratio(all_hits, all_truth);
  report.precision = ratio(all_hits, all_hits + false_flags);
  return report;
}

RecoveryReport score_recovery(const TruthLabels& truth,
                              const AnomalyLabels& labels) {
  return score_recovery(truth, labels.final);
}

Json recovery_to_json(const RecoveryReport& r) {
  Json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  for (const auto& t : r.by_type) {
    j[std::string(to_string(t.type))] = {{"truth_count", t.truth_count},
                                         {"hits", t.hits},
                                         {"precision", t.precision},
                                         {"recall", t.recall}};
  }
  return j;
}

void save_truth(const std::filesystem::path& path, const SynthResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "timestamp,label,type\n";
  const auto& truth = result.truth;
  for (std::size_t t = 0; t < truth.length(); ++t) {
    const bool label = truth.type[t] != AnomalyType::kNone;
    out << format_timestamp(result.table.timestamp(t)) << ',' << (label ? 1 : 0)
        << ',' << to_string(truth.type[t]) << '\n';
  }
}

TruthLabels load_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "timestamp,label,type") {
    throw Error(ErrorCode::kParseError, path.string() + ": expected header timestamp,label,type");
  }
  TruthLabels truth;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const std::string name = c2 == std::string::npos ? "" : line.substr(c2 + 1);
    AnomalyType t = AnomalyType::kNone;
    if (name == "individual") t = AnomalyType::kIndividual;
    else if (name == "corrbreak") t = AnomalyType::kCorrbreak;
    else if (name != "none") {
      throw Error(ErrorCode::kParseError,
                  path.string() + ":" + std::to_string(lineno) + ": bad truth type");
    }
    truth.type.push_back(t);
    truth.source.push_back(-1);
    truth.partner.push_back(-1);
  }
  return truth;
}

}  // namespace multien
