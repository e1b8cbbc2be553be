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

#include "multien/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "multien/error.hpp"

namespace multien {
namespace {

constexpr double kMinGain = 1e-12;

struct Candidate {
  double gain = kMinGain;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeStats {
  double sum = 0.0;
  std::size_t count = 0;
  // Running left-side accumulators during a feature scan.
  double left_sum = 0.0;
  std::size_t left_count = 0;
  double last_value = 0.0;
  Candidate best;
};

void validate(const BoostConfig& cfg) {
  if (cfg.n_estimators < 0) {
    throw Error(ErrorCode::kInvalidConfig, "n_estimators must be >= 0");
  }
  if (!(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "shrinkage must lie in (0, 1]");
  }
  if (cfg.max_depth < 0 || cfg.min_samples_leaf < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "max_depth must be >= 0 and min_samples_leaf >= 1");
  }
}

RegressionTree fit_tree(const Eigen::MatrixXd& x,
                        const std::vector<std::vector<std::size_t>>& sorted,
                        const std::vector<double>& residual,
                        const std::vector<double>& hessian,
                        const BoostConfig& cfg) {
  const std::size_t n = residual.size();
  const auto min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, 0);
  std::vector<int> frontier{0};

  for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    // Dense index of each frontier node, -1 for settled leaves.
    std::vector<int> slot(tree.nodes.size(), -1);
    std::vector<NodeStats> stats(frontier.size());
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int s = slot[static_cast<std::size_t>(node_of[i])];
      if (s < 0) continue;
      stats[static_cast<std::size_t>(s)].sum += residual[i];
      ++stats[static_cast<std::size_t>(s)].count;
    }
    for (std::size_t f = 0; f < sorted.size(); ++f) {
      for (auto& st : stats) {
        st.left_sum = 0.0;
        st.left_count = 0;
      }
      for (const std::size_t i : sorted[f]) {
        const int s = slot[static_cast<std::size_t>(node_of[i])];
        if (s < 0) continue;
        auto& st = stats[static_cast<std::size_t>(s)];
        const double v = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
        if (st.left_count >= min_leaf && st.count - st.left_count >= min_leaf &&
            v != st.last_value) {
          const double nl = static_cast<double>(st.left_count);
          const double nr = static_cast<double>(st.count - st.left_count);
          const double right_sum = st.sum - st.left_sum;
          const double gain = st.left_sum * st.left_sum / nl +
                              right_sum * right_sum / nr -
                              st.sum * st.sum / static_cast<double>(st.count);
          if (gain > st.best.gain) {
            st.best = {gain, static_cast<int>(f), st.last_value};
          }
        }
        st.left_sum += residual[i];
        ++st.left_count;
        st.last_value = v;
      }
    }
    std::vector<int> next;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      const auto& best = stats[k].best;
      if (best.feature < 0) continue;
      const int id = frontier[k];
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[i])];
      if (node.feature < 0) continue;
      node_of[i] = x(static_cast<Eigen::Index>(i), node.feature) <= node.threshold
                       ? node.left
                       : node.right;
    }
    frontier = std::move(next);
  }

  std::vector<double> g(tree.nodes.size(), 0.0), h(tree.nodes.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g[static_cast<std::size_t>(node_of[i])] += residual[i];
    h[static_cast<std::size_t>(node_of[i])] += hessian[i];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    auto& node = tree.nodes[k];
    if (node.feature >= 0) continue;
    node.value = h[k] > std::numeric_limits<double>::min() ? g[k] / h[k] : 0.0;
  }
  return tree;
}

void check_features(const Eigen::MatrixXd& features) {
  if (!features.allFinite()) {
    throw Error(ErrorCode::kNonFiniteFeature, "classifier input has non-finite features");
  }
}

}  // namespace

double sigmoid(double margin) {
  const double p = margin >= 0.0 ? 1.0 / (1.0 + std::exp(-margin))
                                  : std::exp(margin) / (1.0 + std::exp(margin));
  return std::clamp(p, std::numeric_limits<double>::denorm_min(),
                    std::nextafter(1.0, 0.0));
}

double mean_logloss(const std::vector<double>& proba,
                    const std::vector<bool>& labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < proba.size(); ++i) {
    sum -= labels[i] ? std::log(proba[i]) : std::log1p(-proba[i]);
  }
  return proba.empty() ? 0.0 : sum / static_cast<double>(proba.size());
}

Json boost_config_to_json(const BoostConfig& cfg) {
  return Json{{"n_estimators", cfg.n_estimators},
              {"loss", "logloss"},
              {"max_depth", cfg.max_depth},
              {"shrinkage", cfg.shrinkage},
              {"min_samples_leaf", cfg.min_samples_leaf},
              {"rng_seed", cfg.rng_seed}};
}

BoostConfig boost_config_from_json(const Json& j, BoostConfig cfg) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "classifier config must be an object");
  }
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_estimators") cfg.n_estimators = v.get<int>();
      else if (key == "max_depth") cfg.max_depth = v.get<int>();
      else if (key == "shrinkage") cfg.shrinkage = v.get<double>();
      else if (key == "min_samples_leaf") cfg.min_samples_leaf = v.get<int>();
      else if (key == "rng_seed") cfg.rng_seed = v.get<std::uint64_t>();
      else if (key == "loss") {
        if (v.get<std::string>() != "logloss") {
          throw Error(ErrorCode::kInvalidConfig, "only logloss is supported");
        }
      } else {
        throw Error(ErrorCode::kInvalidConfig,
                    "unknown classifier config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("bad classifier config: ") + ex.what());
  }
  validate(cfg);
  return cfg;
}

BoostedModel train_boost(const Eigen::MatrixXd& features,
                         const std::vector<bool>& labels,
                         const BoostConfig& cfg) {
  validate(cfg);
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "labels length != feature rows");
  }
  check_features(features);
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (pos == 0 || pos == n) {
    throw Error(ErrorCode::kSingleClass,
                "training labels contain a single class; the training split needs "
                "both normal and anomalous windows (try a different split)");
  }
  BoostedModel m;
  m.shrinkage = cfg.shrinkage;
  m.n_features = static_cast<std::size_t>(features.cols());
  m.base_score = std::log(static_cast<double>(pos) / static_cast<double>(n - pos));

  std::vector<std::vector<std::size_t>> sorted(m.n_features);
  for (std::size_t f = 0; f < m.n_features; ++f) {
    auto& idx = sorted[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto col = features.col(static_cast<Eigen::Index>(f));
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return col(static_cast<Eigen::Index>(a)) < col(static_cast<Eigen::Index>(b));
    });
  }

  std::vector<double> margin(n, m.base_score), proba(n), residual(n), hessian(n);
  auto refresh = [&] {
    for (std::size_t i = 0; i < n; ++i) proba[i] = sigmoid(margin[i]);
    m.train_logloss.push_back(mean_logloss(proba, labels));
  };
  refresh();
  for (int round = 0; round < cfg.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = (labels[i] ? 1.0 : 0.0) - proba[i];
      hessian[i] = proba[i] * (1.0 - proba[i]);
    }
    RegressionTree tree = fit_tree(features, sorted, residual, hessian, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += cfg.shrinkage * tree.predict(features.row(static_cast<Eigen::Index>(i)));
    }
    m.trees.push_back(std::move(tree));
    refresh();
  }
  return m;
}

std::vector<double> predict_margin(const BoostedModel& m,
                                   const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.cols()) != m.n_features) {
    throw Error(ErrorCode::kShapeMismatch,
                "feature width " + std::to_string(features.cols()) +
                    " != trained width " + std::to_string(m.n_features));
  }
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const auto row = features.row(r);
    // Same accumulation order as training so replays are bit-exact.
    double margin = m.base_score;
    for (const auto& t : m.trees) margin += m.shrinkage * t.predict(row);
    out[static_cast<std::size_t>(r)] = margin;
  }
  return out;
}

std::vector<double> predict_proba(const BoostedModel& m,
                                  const Eigen::MatrixXd& features) {
  check_features(features);
  auto out = predict_margin(m, features);
  for (auto& v : out) v = sigmoid(v);
  return out;
}

Json boost_to_json(const BoostedModel& m) {
  Json trees = Json::array();
  for (const auto& t : m.trees) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(),
         right = Json::array(), value = Json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return Json{{"format", "multien-boost"},
              {"version", 1},
              {"base_score", m.base_score},
              {"shrinkage", m.shrinkage},
              {"n_features", m.n_features},
              {"train_logloss", m.train_logloss},
              {"trees", trees}};
}

BoostedModel boost_from_json(const Json& j) {
  try {
    BoostedModel m;
    m.base_score = j.at("base_score").get<double>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.train_logloss = j.value("train_logloss", std::vector<double>{});
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t k = feature.size();
      if (k == 0 || threshold.size() != k || left.size() != k ||
          right.size() != k || value.size() != k) {
        throw Error(ErrorCode::kParseError, "malformed tree in classifier JSON");
      }
      RegressionTree tree;
      for (std::size_t i = 0; i < k; ++i) {
        const bool split = feature[i] >= 0;
        if (split && (static_cast<std::size_t>(feature[i]) >= m.n_features ||
                      left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                      static_cast<std::size_t>(std::max(left[i], right[i])) >= k)) {
          throw Error(ErrorCode::kParseError, "invalid split in classifier JSON");
        }
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError,
                std::string("bad classifier JSON: ") + ex.what());
  }
}

}  // namespace multien
