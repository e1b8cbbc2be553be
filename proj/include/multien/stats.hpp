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

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "multien/timeseries.hpp"

namespace multien {

// Sample Pearson coefficient; nullopt when either input is constant.
// Throws LengthMismatch / TooShort on bad shapes.
std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y);

// Pairwise Pearson matrix. Undefined pairs (constant column) hold 0 and are
// flagged in `undefined`.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(std::vector<SourceId> sources, std::vector<double> values);

  std::size_t size() const { return sources_.size(); }
  const std::vector<SourceId>& sources() const { return sources_; }
  double at(std::size_t i, std::size_t j) const { return r_[i * size() + j]; }
  double at(const SourceId& a, const SourceId& b) const;
  bool undefined(std::size_t i, std::size_t j) const {
    return undefined_[i * size() + j];
  }
  std::size_t index(const SourceId& id) const;
  const std::vector<double>& values() const { return r_; }

  void mark_undefined(std::size_t i, std::size_t j);

 private:
  std::vector<SourceId> sources_;
  std::vector<double> r_;
  std::vector<bool> undefined_;
};

CorrelationMatrix correlation_matrix(const TimeSeriesTable& table);

Json correlation_to_json(const CorrelationMatrix& m);
CorrelationMatrix correlation_from_json(const Json& j);

inline constexpr std::size_t kHoursPerWeek = 168;

struct WeeklyCorrelation {
  std::size_t week = 0;
  std::optional<double> r;
};

// One coefficient per disjoint 168-row block; the trailing partial week is
// dropped.
std::vector<WeeklyCorrelation> weekly_correlation(const TimeSeriesTable& table,
                                                  const SourceId& a,
                                                  const SourceId& b);

inline constexpr double kDefaultCorrelationThreshold = 0.2;

struct SourcePartition {
  std::vector<SourceId> correlated;
  std::vector<SourceId> non_correlated;
  double threshold = kDefaultCorrelationThreshold;
  bool use_absolute = false;
};

// A source is correlated iff some other source has r > threshold (or |r| when
// `use_absolute`).
SourcePartition partition_sources(const CorrelationMatrix& m, double threshold,
                                  bool use_absolute = false);

// Strength of association used by the partition and pair selection.
double association(const CorrelationMatrix& m, std::size_t i, std::size_t j,
                   bool use_absolute);

struct SimpleRegressionFit {
  double intercept = 0.0;
  double slope = 0.0;
  // Residual sum of squares over N - p.
  double mse = 0.0;
  std::vector<double> leverage;
  std::vector<double> residuals;
  int n_coeffs = 2;
};

// OLS of y on x with intercept.
SimpleRegressionFit fit_simple_regression(std::span<const double> x,
                                          std::span<const double> y);

// D_i = e_i^2 h_ii / (p * MSE * (1 - h_ii)^2). Throws PerfectFit when MSE is 0
// and LeverageOne when some h_ii reaches 1.
std::vector<double> cooks_distance(const SimpleRegressionFit& fit);

// Influence cut-off 4 / (N - K - 1).
double cooks_threshold(std::size_t n, std::size_t k);

}  // namespace multien
