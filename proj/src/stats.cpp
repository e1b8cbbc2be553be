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

#include "multien/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "multien/error.hpp"

namespace multien {
namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "pearson: length mismatch");
  }
  if (x.size() < 2) {
    throw Error(ErrorCode::kTooShort, "pearson: need at least two points");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix::CorrelationMatrix(std::vector<SourceId> sources,
                                     std::vector<double> values)
    : sources_(std::move(sources)), r_(std::move(values)) {
  const std::size_t n = sources_.size();
  if (r_.size() != n * n) {
    throw Error(ErrorCode::kShapeMismatch,
                "correlation matrix needs n*n values");
  }
  undefined_.assign(n * n, false);
  for (std::size_t i = 0; i < n; ++i) {
    r_[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = r_[i * n + j];
      if (!std::isfinite(v) || v < -1.0 - 1e-12 || v > 1.0 + 1e-12) {
        throw Error(ErrorCode::kInvalidSpec,
                    "correlation entries must lie in [-1, 1]");
      }
      if (std::abs(v - r_[j * n + i]) > 1e-12) {
        throw Error(ErrorCode::kInvalidSpec, "correlation matrix not symmetric");
      }
    }
  }
}

double CorrelationMatrix::at(const SourceId& a, const SourceId& b) const {
  return at(index(a), index(b));
}

std::size_t CorrelationMatrix::index(const SourceId& id) const {
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (sources_[i] == id) return i;
  }
  throw Error(ErrorCode::kPlanMismatch,
              "source '" + id.str() + "' not in correlation matrix");
}

void CorrelationMatrix::mark_undefined(std::size_t i, std::size_t j) {
  const std::size_t n = size();
  undefined_[i * n + j] = true;
  undefined_[j * n + i] = true;
  r_[i * n + j] = 0.0;
  r_[j * n + i] = 0.0;
}

CorrelationMatrix correlation_matrix(const TimeSeriesTable& table) {
  const std::size_t n = table.width();
  std::vector<double> values(n * n, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> undefined;
  for (std::size_t i = 0; i < n; ++i) {
    values[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      auto r = pearson(table.column(i), table.column(j));
      if (!r) {
        log_warning("correlation between '" + table.sources()[i].str() +
                    "' and '" + table.sources()[j].str() +
                    "' undefined (constant column); treated as 0");
        undefined.emplace_back(i, j);
        continue;
      }
      values[i * n + j] = *r;
      values[j * n + i] = *r;
    }
  }
  CorrelationMatrix m(table.sources(), std::move(values));
  for (auto [i, j] : undefined) m.mark_undefined(i, j);
  return m;
}

Json correlation_to_json(const CorrelationMatrix& m) {
  Json j;
  j["sources"] = to_names(m.sources());
  j["values"] = m.values();
  Json undefined = Json::array();
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      if (m.undefined(a, b)) {
        undefined.push_back({m.sources()[a].str(), m.sources()[b].str()});
      }
    }
  }
  j["undefined"] = undefined;
  return j;
}

CorrelationMatrix correlation_from_json(const Json& j) {
  try {
    auto sources = to_source_ids(j.at("sources").get<std::vector<std::string>>());
    auto values = j.at("values").get<std::vector<double>>();
    CorrelationMatrix m(std::move(sources), std::move(values));
    if (j.contains("undefined")) {
      for (const auto& pair : j["undefined"]) {
        m.mark_undefined(m.index(SourceId(pair.at(0).get<std::string>())),
                         m.index(SourceId(pair.at(1).get<std::string>())));
      }
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError,
                std::string("bad correlation matrix JSON: ") + ex.what());
  }
}

std::vector<WeeklyCorrelation> weekly_correlation(const TimeSeriesTable& table,
                                                  const SourceId& a,
                                                  const SourceId& b) {
  if (table.rows() < kHoursPerWeek) {
    throw Error(ErrorCode::kTooShort,
                "weekly correlation needs at least 168 rows");
  }
  auto x = table.column(a);
  auto y = table.column(b);
  std::vector<WeeklyCorrelation> out;
  const std::size_t weeks = table.rows() / kHoursPerWeek;
  for (std::size_t w = 0; w < weeks; ++w) {
    out.push_back({w, pearson(x.subspan(w * kHoursPerWeek, kHoursPerWeek),
                              y.subspan(w * kHoursPerWeek, kHoursPerWeek))});
  }
  return out;
}

double association(const CorrelationMatrix& m, std::size_t i, std::size_t j,
                   bool use_absolute) {
  const double r = m.at(i, j);
  return use_absolute ? std::abs(r) : r;
}

SourcePartition partition_sources(const CorrelationMatrix& m, double threshold,
                                  bool use_absolute) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "correlation threshold must lie in (0, 1)");
  }
  SourcePartition p;
  p.threshold = threshold;
  p.use_absolute = use_absolute;
  for (std::size_t i = 0; i < m.size(); ++i) {
    bool correlated = false;
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i != j && association(m, i, j, use_absolute) > threshold) {
        correlated = true;
        break;
      }
    }
    (correlated ? p.correlated : p.non_correlated).push_back(m.sources()[i]);
  }
  return p;
}

SimpleRegressionFit fit_simple_regression(std::span<const double> x,
                                          std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "regression: length mismatch");
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::kTooShort, "regression: need at least three points");
  }
  // Extended precision keeps near-zero residuals accurate to the last bits.
  using Wide = long double;
  const auto n = static_cast<double>(x.size());
  Wide sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const Wide mx = sx / x.size();
  const Wide my = sy / y.size();
  Wide sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) {
    throw Error(ErrorCode::kConstantPredictor, "regression: constant predictor");
  }
  const Wide slope = sxy / sxx;
  SimpleRegressionFit fit;
  fit.slope = static_cast<double>(slope);
  fit.intercept = static_cast<double>(my - slope * mx);
  fit.residuals.resize(x.size());
  fit.leverage.resize(x.size());
  Wide wide_rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Wide e = (y[i] - my) - slope * (x[i] - mx);
    fit.residuals[i] = static_cast<double>(e);
    wide_rss += e * e;
    fit.leverage[i] = static_cast<double>(1 / static_cast<Wide>(n) + (x[i] - mx) * (x[i] - mx) / sxx);
  }
  const auto rss = static_cast<double>(wide_rss);
  fit.mse = rss / (n - 2.0);
  // Residuals at rounding level relative to the spread of y are an exact fit.
  double syy = 0.0;
  for (double v : y) syy += static_cast<double>((v - my) * (v - my));
  constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();
  if (rss <= kRoundoff * kRoundoff * syy) fit.mse = 0.0;
  return fit;
}

std::vector<double> cooks_distance(const SimpleRegressionFit& fit) {
  if (!(fit.mse > 0.0)) {
    throw Error(ErrorCode::kPerfectFit, "Cook's distance undefined: MSE is 0");
  }
  std::vector<double> d(fit.residuals.size());
  const double p = static_cast<double>(fit.n_coeffs);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double h = fit.leverage[i];
    if (h >= 1.0 - 1e-12) {
      throw Error(ErrorCode::kLeverageOne,
                  "Cook's distance undefined: leverage 1 at index " +
                      std::to_string(i));
    }
    const double one_minus = 1.0 - h;
    d[i] = fit.residuals[i] * fit.residuals[i] * h /
           (p * fit.mse * one_minus * one_minus);
  }
  return d;
}

double cooks_threshold(std::size_t n, std::size_t k) {
  if (n <= k + 1) {
    throw Error(ErrorCode::kDegenerateSize,
                "Cook's threshold needs N > K + 1");
  }
  return 4.0 / static_cast<double>(n - k - 1);
}

}  // namespace multien
