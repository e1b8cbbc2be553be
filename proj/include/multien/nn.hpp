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

// Minimal dense/LSTM building blocks with exact reverse-mode gradients.
// Batches are column-per-sample matrices.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace multien::nn {

using Matrix = Eigen::MatrixXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

enum class Activation { kIdentity, kTanh, kSigmoid };

// Uniform(-s, s) with s = 1/sqrt(fan_in).
void init_uniform(Param& p, int fan_in, std::mt19937_64& rng);

class Dense {
 public:
  struct Trace {
    Matrix input;
    Matrix output;  // post-activation
  };

  Dense() = default;
  Dense(const std::string& name, int in, int out, Activation act);

  void init(std::mt19937_64& rng);
  Matrix forward(const Matrix& x, Trace* trace = nullptr) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  Matrix backward(const Trace& trace, const Matrix& d_output);

  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }

  Param weight;
  Param bias;
  Activation act = Activation::kIdentity;
};

// Feed-forward stack of Dense layers.
class Mlp {
 public:
  using Trace = std::vector<Dense::Trace>;

  Mlp() = default;
  explicit Mlp(std::vector<Dense> layers) : layers_(std::move(layers)) {}

  void init(std::mt19937_64& rng);
  Matrix forward(const Matrix& x, Trace* trace = nullptr) const;
  Matrix backward(const Trace& trace, const Matrix& d_output);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  std::vector<Dense> layers_;
};

// Single-layer LSTM, gate order (input, forget, cell, output), zero initial
// state.
class Lstm {
 public:
  struct Trace {
    std::vector<Matrix> x, i, f, g, o, c, h;
  };

  Lstm() = default;
  Lstm(const std::string& name, int in, int hidden);

  void init(std::mt19937_64& rng);
  // Returns hidden states h_1..h_T.
  std::vector<Matrix> forward(const std::vector<Matrix>& xs,
                              Trace* trace = nullptr) const;
  // `d_hidden[t]` is dL/dh_t from outside the recurrence (may be empty to
  // mean zero). Returns dL/dx_t.
  std::vector<Matrix> backward(const Trace& trace,
                               const std::vector<Matrix>& d_hidden);
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  int hidden() const { return hidden_; }

  Param w_input;
  Param w_hidden;
  Param bias;

 private:
  int hidden_ = 0;
};

struct AdamSettings {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param*> params, AdamSettings settings);

  void step();
  std::int64_t steps() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  AdamSettings s_;
  std::int64_t t_ = 0;
};

}  // namespace multien::nn
