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

#include "multien/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "multien/error.hpp"

namespace multien {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch,
                "scores (" + std::to_string(a) + ") and labels (" +
                    std::to_string(b) + ") differ in length");
  }
}

double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

double class_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  return safe_div(2.0 * static_cast<double>(tp),
                  static_cast<double>(2 * tp + fp + fn));
}

Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json confusion_json(const Confusion& c) {
  return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

}  // namespace

double auroc(std::span<const double> scores, const std::vector<bool>& labels) {
  check_lengths(scores.size(), labels.size());
  const std::size_t n = scores.size();
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (pos == 0 || pos == n) {
    throw Error(ErrorCode::kSingleClass, "AUROC needs both classes");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[idx[k]]) rank_sum += mid;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n - pos));
}

F1Result f1_from_confusion(const Confusion& c) {
  F1Result r;
  r.confusion = c;
  r.f1 = class_f1(c.tp, c.fp, c.fn);
  const double f1_neg = class_f1(c.tn, c.fn, c.fp);
  r.macro_f1 = 0.5 * (r.f1 + f1_neg);
  const double support_pos = static_cast<double>(c.tp + c.fn);
  const double support_neg = static_cast<double>(c.tn + c.fp);
  r.weighted_f1 =
      safe_div(r.f1 * support_pos + f1_neg * support_neg, support_pos + support_neg);
  return r;
}

F1Result f1_suite(std::span<const double> scores,
                  const std::vector<bool>& labels, double threshold) {
  check_lengths(scores.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return f1_from_confusion(c);
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 100; ++k) grid.push_back(static_cast<double>(k) / 100.0);
  return grid;
}

EvalReport best_threshold_sweep(std::span<const double> scores,
                                const std::vector<bool>& labels,
                                const std::vector<double>& grid) {
  check_lengths(scores.size(), labels.size());
  if (grid.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "threshold grid is empty");
  }
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  EvalReport best;
  bool have = false;
  for (const double t : sorted_grid) {
    const F1Result r = f1_suite(scores, labels, t);
    if (!have || r.f1 > best.f1) {
      best.f1 = r.f1;
      best.macro_f1 = r.macro_f1;
      best.weighted_f1 = r.weighted_f1;
      best.confusion = r.confusion;
      best.best_threshold = t;
      have = true;
    }
  }
  const auto pos = std::count(labels.begin(), labels.end(), true);
  best.auroc = pos > 0 && static_cast<std::size_t>(pos) < labels.size()
                   ? auroc(scores, labels)
                   : std::numeric_limits<double>::quiet_NaN();
  return best;
}

EvalReport holdout_threshold_eval(std::span<const double> scores,
                                  const std::vector<bool>& labels,
                                  double fraction,
                                  const std::vector<double>& grid) {
  check_lengths(scores.size(), labels.size());
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "holdout fraction must lie in (0, 1)");
  }
  const auto cut = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(scores.size())));
  const std::vector<bool> val_labels(labels.begin(),
                                     labels.begin() + static_cast<std::ptrdiff_t>(cut));
  const std::vector<bool> test_labels(labels.begin() + static_cast<std::ptrdiff_t>(cut),
                                      labels.end());
  const EvalReport picked =
      best_threshold_sweep(scores.subspan(0, cut), val_labels, grid);
  const auto rest = scores.subspan(cut);
  const F1Result r = f1_suite(rest, test_labels, picked.best_threshold);
  EvalReport out;
  out.best_threshold = picked.best_threshold;
  out.f1 = r.f1;
  out.macro_f1 = r.macro_f1;
  out.weighted_f1 = r.weighted_f1;
  out.confusion = r.confusion;
  const auto pos = std::count(test_labels.begin(), test_labels.end(), true);
  out.auroc = pos > 0 && static_cast<std::size_t>(pos) < test_labels.size()
                  ? auroc(rest, test_labels)
                  : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Json eval_report_to_json(const EvalReport& r) {
  return Json{{"AUROC", nullable(r.auroc)},
              {"M-F1", r.macro_f1},
              {"W-F1", r.weighted_f1},
              {"F1", r.f1},
              {"best_threshold", r.best_threshold},
              {"confusion", confusion_json(r.confusion)},
              {"windows", r.confusion.total()}};
}

EvalReport eval_report_from_json(const Json& j) {
  try {
    EvalReport r;
    r.auroc = j.at("AUROC").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                      : j.at("AUROC").get<double>();
    r.macro_f1 = j.at("M-F1").get<double>();
    r.weighted_f1 = j.at("W-F1").get<double>();
    r.f1 = j.at("F1").get<double>();
    r.best_threshold = j.at("best_threshold").get<double>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                   c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>()};
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad eval report: ") + ex.what());
  }
}

Json aggregate_reports(const std::vector<EvalReport>& reports) {
  auto stat = [&](auto get) {
    const double n = static_cast<double>(reports.size());
    double mean = 0.0;
    for (const auto& r : reports) mean += get(r);
    mean = reports.empty() ? 0.0 : mean / n;
    double var = 0.0;
    for (const auto& r : reports) var += (get(r) - mean) * (get(r) - mean);
    const double sd = reports.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return Json{{"mean", nullable(mean)}, {"std", nullable(sd)}};
  };
  return Json{{"runs", reports.size()},
              {"AUROC", stat([](const EvalReport& r) { return r.auroc; })},
              {"M-F1", stat([](const EvalReport& r) { return r.macro_f1; })},
              {"W-F1", stat([](const EvalReport& r) { return r.weighted_f1; })},
              {"F1", stat([](const EvalReport& r) { return r.f1; })}};
}

AttributionReport shapley_groups(const PredictFn& predict,
                                 const Eigen::MatrixXd& explained,
                                 const Eigen::MatrixXd& background,
                                 const std::vector<FeatureSpan>& layout,
                                 const ShapleyOptions& options) {
  if (options.n_perms == 0) {
    throw Error(ErrorCode::kInvalidConfig, "n_perms must be >= 1");
  }
  if (background.rows() == 0) {
    throw Error(ErrorCode::kInvalidConfig, "background set is empty");
  }
  if (explained.cols() != background.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "explained and background rows differ in width");
  }
  const std::size_t g = layout.size();
  if (g == 0 || g > 30) {
    throw Error(ErrorCode::kInvalidConfig, "attribution supports 1..30 groups");
  }
  std::size_t covered = 0;
  for (const auto& s : layout) {
    if (s.begin != covered || s.end <= s.begin) {
      throw Error(ErrorCode::kShapeMismatch, "feature layout must be contiguous");
    }
    covered = s.end;
  }
  if (covered != static_cast<std::size_t>(explained.cols())) {
    throw Error(ErrorCode::kShapeMismatch, "feature layout does not cover all columns");
  }

  const auto rows = static_cast<std::size_t>(explained.rows());
  AttributionReport report;
  report.contributions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                               static_cast<Eigen::Index>(g));
  report.n_perms = options.n_perms;
  report.background_rows = static_cast<std::size_t>(background.rows());
  report.explained_rows = rows;
  report.seed = options.seed;
  std::vector<double> residual(rows, 0.0);

  auto explain_row = [&](std::size_t r) {
    std::unordered_map<std::uint32_t, double> cache;
    const auto x = explained.row(static_cast<Eigen::Index>(r));
    auto value = [&](std::uint32_t mask) {
      if (auto it = cache.find(mask); it != cache.end()) return it->second;
      Eigen::MatrixXd mixed = background;
      for (std::size_t k = 0; k < g; ++k) {
        if ((mask >> k & 1U) == 0) continue;
        const auto b = static_cast<Eigen::Index>(layout[k].begin);
        const auto w = static_cast<Eigen::Index>(layout[k].width());
        mixed.middleCols(b, w).rowwise() = x.segment(b, w);
      }
      const auto p = predict(mixed);
      const double mean =
          std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
      cache.emplace(mask, mean);
      return mean;
    };
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(r),
                      static_cast<std::uint32_t>(r >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> perm(g);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<double> phi(g, 0.0);
    for (std::size_t t = 0; t < options.n_perms; ++t) {
      std::shuffle(perm.begin(), perm.end(), rng);
      std::uint32_t mask = 0;
      double prev = value(0);
      for (const std::size_t k : perm) {
        mask |= 1U << k;
        const double cur = value(mask);
        phi[k] += cur - prev;
        prev = cur;
      }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
      phi[k] /= static_cast<double>(options.n_perms);
      report.contributions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          phi[k];
      total += phi[k];
    }
    const std::uint32_t full = (1U << g) - 1U;
    residual[r] = std::abs(total - (value(full) - value(0)));
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(
                                            options.threads,
                                            static_cast<unsigned>(std::max<std::size_t>(rows, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < rows; ++r) explain_row(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < rows; r += workers) explain_row(r);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t k = 0; k < g; ++k) {
    GroupAttribution a;
    a.group = layout[k].group;
    const auto col = report.contributions.col(static_cast<Eigen::Index>(k));
    if (rows > 0) {
      a.mean_abs = col.cwiseAbs().sum() / static_cast<double>(rows);
      a.mean_signed = col.sum() / static_cast<double>(rows);
    }
    report.groups.push_back(a);
  }
  std::vector<std::size_t> order(g);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.groups[a].mean_abs > report.groups[b].mean_abs;
  });
  for (std::size_t k = 0; k < g; ++k) report.groups[order[k]].rank = k + 1;
  report.efficiency_residual =
      residual.empty() ? 0.0 : *std::max_element(residual.begin(), residual.end());
  return report;
}

Json attribution_to_json(const AttributionReport& r) {
  Json groups = Json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"group", g.group},
                      {"mean_abs_contribution", g.mean_abs},
                      {"mean_signed_contribution", g.mean_signed},
                      {"rank", g.rank}});
  }
  return Json{{"groups", groups},
              {"efficiency_residual", r.efficiency_residual},
              {"sampling",
               {{"n_perms", r.n_perms},
                {"background_rows", r.background_rows},
                {"explained_rows", r.explained_rows},
                {"seed", r.seed}}}};
}

}  // namespace multien
