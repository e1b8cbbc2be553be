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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "multien/labeling.hpp"
#include "multien/timeseries.hpp"

namespace multien {

struct SynthSource {
  std::string name;
  double loading = 1.0;  // a_i >= 0
  double noise = 1.0;    // b_i > 0
  double offset = 5.0;
  double scale = 1.0;
  std::string unit = "kWh";
};

struct SeasonalSpec {
  double daily_amplitude = 1.0;
  double weekly_amplitude = 0.5;
  double ar_phi = 0.7;
  // AR(1) coefficient of each source's own unit-variance noise.
  double noise_phi = 0.7;
};

struct AnomalySpec {
  double rate_individual = 0.005;
  double rate_corrbreak = 0.02;
  double spike_min = 3.0;
  double spike_max = 6.0;
  // Pairs with implied correlation at or above this host correlation breaks.
  double corrbreak_min_rho = 0.5;
  // The member left in place must sit at least this far from its mean, and
  // the replaced member must move by at least `corrbreak_shift_z`.
  double corrbreak_partner_z = 2.25;
  double corrbreak_shift_z = 1.5;
  // Every source stays below this z-score at a break.
  double corrbreak_max_z = 3.0;
};

struct SynthSpec {
  std::size_t length = 10000;  // hours
  Timestamp start = 1577836800;  // 2020-01-01T00:00:00Z
  std::vector<SynthSource> sources;
  SeasonalSpec seasonal;
  AnomalySpec anomalies;
  std::uint64_t seed = 0;

  // a_i a_j / sqrt((a_i^2 + b_i^2)(a_j^2 + b_j^2))
  double implied_correlation(std::size_t i, std::size_t j) const;
};

// Throws InvalidSpec.
void validate_spec(const SynthSpec& spec);
// Rejects unknown keys.
SynthSpec synth_spec_from_json(const Json& j);
Json synth_spec_to_json(const SynthSpec& spec);

// Two weakly and two strongly loaded sources.
SynthSpec default_synth_spec(std::uint64_t seed = 0);
// The default plus a fifth source with zero loading.
SynthSpec five_source_synth_spec(std::uint64_t seed = 0);

enum class AnomalyType { kNone, kIndividual, kCorrbreak };
std::string_view to_string(AnomalyType type);

struct TruthLabels {
  std::vector<AnomalyType> type;   // per timestamp
  std::vector<int> source;         // spiked or replaced source, -1 if none
  std::vector<int> partner;        // other pair member for breaks, else -1

  std::size_t length() const { return type.size(); }
  std::vector<bool> mask(AnomalyType t) const;
  std::vector<bool> any() const;
};

struct SynthResult {
  TimeSeriesTable table;
  TruthLabels truth;
  std::size_t clipped_cells = 0;
};

SynthResult generate(const SynthSpec& spec);

struct TypeRecovery {
  AnomalyType type = AnomalyType::kNone;
  std::size_t truth_count = 0;
  std::size_t hits = 0;
  double precision = 0.0;  // hits / (hits + flags on clean timestamps)
  double recall = 0.0;
};

struct RecoveryReport {
  std::vector<TypeRecovery> by_type;  // individual, corrbreak
  double precision = 0.0;             // all types
  double recall = 0.0;
  const TypeRecovery& get(AnomalyType t) const;
};

// Compares a flag vector against the truth. Throws LengthMismatch.
RecoveryReport score_recovery(const TruthLabels& truth,
                              const std::vector<bool>& flags);
RecoveryReport score_recovery(const TruthLabels& truth,
                              const AnomalyLabels& labels);
Json recovery_to_json(const RecoveryReport& r);

// `timestamp,label,type`
void save_truth(const std::filesystem::path& path, const SynthResult& result);
// Types only; source and partner indices are not stored in the file.
TruthLabels load_truth(const std::filesystem::path& path);

}  // namespace multien
