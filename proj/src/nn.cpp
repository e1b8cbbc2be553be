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

#include "multien/nn.hpp"

#include <cmath>

namespace multien::nn {
namespace {

// Vectorizes through exp; Eigen's double tanh is scalar.
template <typename Derived>
Matrix tanh_of(const Eigen::MatrixBase<Derived>& m) {
  return (1.0 - 2.0 / ((2.0 * m.array()).exp() + 1.0)).matrix();
}

Matrix activate(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::kIdentity: return pre;
    case Activation::kTanh: return tanh_of(pre);
    case Activation::kSigmoid:
      return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
  }
  return pre;
}

Matrix sigmoid(const Matrix& m) {
  return (1.0 / (1.0 + (-m.array()).exp())).matrix();
}

}  // namespace

void init_uniform(Param& p, int fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-s, s);
  for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) p.value(r, c) = dist(rng);
  }
  p.zero_grad();
}

Dense::Dense(const std::string& name, int in, int out, Activation a)
    : act(a) {
  weight.name = name + ".weight";
  weight.value = Matrix::Zero(out, in);
  weight.zero_grad();
  bias.name = name + ".bias";
  bias.value = Matrix::Zero(out, 1);
  bias.zero_grad();
}

void Dense::init(std::mt19937_64& rng) {
  init_uniform(weight, in(), rng);
  init_uniform(bias, in(), rng);
}

Matrix Dense::forward(const Matrix& x, Trace* trace) const {
  Matrix pre = weight.value * x;
  pre.colwise() += bias.value.col(0);
  Matrix y = activate(pre, act);
  if (trace != nullptr) {
    trace->input = x;
    trace->output = y;
  }
  return y;
}

Matrix Dense::backward(const Trace& trace, const Matrix& d_output) {
  Matrix d_pre;
  switch (act) {
    case Activation::kIdentity: d_pre = d_output; break;
    case Activation::kTanh:
      d_pre = (d_output.array() * (1.0 - trace.output.array().square())).matrix();
      break;
    case Activation::kSigmoid:
      d_pre = (d_output.array() * trace.output.array() *
               (1.0 - trace.output.array()))
                  .matrix();
      break;
  }
  weight.grad.noalias() += d_pre * trace.input.transpose();
  bias.grad.noalias() += d_pre.rowwise().sum();
  return weight.value.transpose() * d_pre;
}

void Mlp::init(std::mt19937_64& rng) {
  for (auto& l : layers_) l.init(rng);
}

Matrix Mlp::forward(const Matrix& x, Trace* trace) const {
  if (trace != nullptr) trace->assign(layers_.size(), {});
  Matrix h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k].forward(h, trace != nullptr ? &(*trace)[k] : nullptr);
  }
  return h;
}

Matrix Mlp::backward(const Trace& trace, const Matrix& d_output) {
  Matrix d = d_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    d = layers_[k].backward(trace[k], d);
  }
  return d;
}

std::vector<Param*> Mlp::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Param*> Mlp::params() const {
  std::vector<const Param*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Lstm::Lstm(const std::string& name, int in, int hidden) : hidden_(hidden) {
  w_input.name = name + ".w_input";
  w_input.value = Matrix::Zero(4 * hidden, in);
  w_input.zero_grad();
  w_hidden.name = name + ".w_hidden";
  w_hidden.value = Matrix::Zero(4 * hidden, hidden);
  w_hidden.zero_grad();
  bias.name = name + ".bias";
  bias.value = Matrix::Zero(4 * hidden, 1);
  bias.zero_grad();
}

void Lstm::init(std::mt19937_64& rng) {
  init_uniform(w_input, static_cast<int>(w_input.value.cols()), rng);
  init_uniform(w_hidden, hidden_, rng);
  init_uniform(bias, hidden_, rng);
}

std::vector<Matrix> Lstm::forward(const std::vector<Matrix>& xs,
                                  Trace* trace) const {
  const int hsz = hidden_;
  const Eigen::Index batch = xs.empty() ? 0 : xs.front().cols();
  Matrix h = Matrix::Zero(hsz, batch);
  Matrix c = Matrix::Zero(hsz, batch);
  std::vector<Matrix> hs;
  hs.reserve(xs.size());
  if (trace != nullptr) *trace = Trace{};
  for (const Matrix& x : xs) {
    Matrix gates = w_input.value * x;
    gates.noalias() += w_hidden.value * h;
    gates.colwise() += bias.value.col(0);
    Matrix i = sigmoid(gates.topRows(hsz));
    Matrix f = sigmoid(gates.middleRows(hsz, hsz));
    Matrix g = tanh_of(gates.middleRows(2 * hsz, hsz));
    Matrix o = sigmoid(gates.bottomRows(hsz));
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * tanh_of(c).array()).matrix();
    if (trace != nullptr) {
      trace->x.push_back(x);
      trace->i.push_back(std::move(i));
      trace->f.push_back(std::move(f));
      trace->g.push_back(std::move(g));
      trace->o.push_back(std::move(o));
      trace->c.push_back(c);
      trace->h.push_back(h);
    }
    hs.push_back(h);
  }
  return hs;
}

std::vector<Matrix> Lstm::backward(const Trace& trace,
                                   const std::vector<Matrix>& d_hidden) {
  const int hsz = hidden_;
  const std::size_t steps = trace.x.size();
  const Eigen::Index batch = steps == 0 ? 0 : trace.x.front().cols();
  std::vector<Matrix> dx(steps);
  Matrix dh_next = Matrix::Zero(hsz, batch);
  Matrix dc_next = Matrix::Zero(hsz, batch);
  Matrix d_gates(4 * hsz, batch);
  for (std::size_t t = steps; t-- > 0;) {
    Matrix dh = dh_next;
    if (t < d_hidden.size() && d_hidden[t].size() > 0) dh += d_hidden[t];
    const Matrix tanh_c = tanh_of(trace.c[t]);
    const Matrix c_prev =
        t > 0 ? trace.c[t - 1] : Matrix(Matrix::Zero(hsz, batch));
    const Matrix h_prev =
        t > 0 ? trace.h[t - 1] : Matrix(Matrix::Zero(hsz, batch));
    Matrix dc = dc_next + (dh.array() * trace.o[t].array() *
                           (1.0 - tanh_c.array().square()))
                              .matrix();
    const auto& i = trace.i[t].array();
    const auto& f = trace.f[t].array();
    const auto& g = trace.g[t].array();
    const auto& o = trace.o[t].array();
    d_gates.topRows(hsz) = (dc.array() * g * i * (1.0 - i)).matrix();
    d_gates.middleRows(hsz, hsz) =
        (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    d_gates.middleRows(2 * hsz, hsz) =
        (dc.array() * i * (1.0 - g.square())).matrix();
    d_gates.bottomRows(hsz) =
        (dh.array() * tanh_c.array() * o * (1.0 - o)).matrix();
    w_input.grad.noalias() += d_gates * trace.x[t].transpose();
    w_hidden.grad.noalias() += d_gates * h_prev.transpose();
    bias.grad.noalias() += d_gates.rowwise().sum();
    dx[t] = w_input.value.transpose() * d_gates;
    dh_next = w_hidden.value.transpose() * d_gates;
    dc_next = (dc.array() * f).matrix();
  }
  return dx;
}

std::vector<Param*> Lstm::params() { return {&w_input, &w_hidden, &bias}; }

std::vector<const Param*> Lstm::params() const {
  return {&w_input, &w_hidden, &bias};
}

Adam::Adam(std::vector<Param*> params, AdamSettings settings)
    : params_(std::move(params)), s_(settings) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    m_[k] = s_.beta1 * m_[k] + (1.0 - s_.beta1) * p.grad;
    v_[k] = s_.beta2 * v_[k] + (1.0 - s_.beta2) * p.grad.array().square().matrix();
    p.value.array() -= s_.learning_rate * (m_[k].array() / c1) /
                       ((v_[k].array() / c2).sqrt() + s_.epsilon);
  }
}

}  // namespace multien::nn
