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
#include <vector>

#include <Eigen/Dense>

#include "multien/timeseries.hpp"

namespace multien {

struct BoostConfig {
  int n_estimators = 400;
  int max_depth = 3;
  double shrinkage = 0.1;
  int min_samples_leaf = 20;
  // Tree building has no random component; kept for config symmetry.
  std::uint64_t rng_seed = 0;
};

Json boost_config_to_json(const BoostConfig& cfg);
BoostConfig boost_config_from_json(const Json& j, BoostConfig base = {});

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output before shrinkage
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  double predict(const Row& x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(k)];
      k = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }
};

struct BoostedModel {
  double base_score = 0.0;  // log-odds of the positive prior
  double shrinkage = 0.1;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
  // Mean training log-loss after 0, 1, ..., |trees| rounds.
  std::vector<double> train_logloss;
};

// Rows are samples. Throws SingleClass, NonFiniteFeature, ShapeMismatch.
BoostedModel train_boost(const Eigen::MatrixXd& features,
                         const std::vector<bool>& labels,
                         const BoostConfig& cfg = {});

// base_score + shrinkage * sum of tree outputs.
std::vector<double> predict_margin(const BoostedModel& m,
                                   const Eigen::MatrixXd& features);
// Strictly inside (0, 1).
std::vector<double> predict_proba(const BoostedModel& m,
                                  const Eigen::MatrixXd& features);

double sigmoid(double margin);
double mean_logloss(const std::vector<double>& proba,
                    const std::vector<bool>& labels);

Json boost_to_json(const BoostedModel& m);
BoostedModel boost_from_json(const Json& j);

}  // namespace multien
