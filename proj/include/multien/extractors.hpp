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
#include <memory>
#include <string>
#include <vector>

#include "multien/nn.hpp"
#include "multien/timeseries.hpp"

namespace multien {

enum class ExtractorKind { kDenseAe, kLstmAe, kUsad };

std::string_view to_string(ExtractorKind kind);
ExtractorKind extractor_kind_from_string(std::string_view name);

struct ExtractorConfig {
  ExtractorKind kind = ExtractorKind::kUsad;
  int latent_dim = 8;
  int hidden_dim = 64;
  int epochs = 100;
  int batch_size = 1020;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t rng_seed = 0;
  // Append reconstruction error(s) to the bottleneck encoding.
  bool include_error = true;
};

Json extractor_config_to_json(const ExtractorConfig& cfg);
// Rejects unknown keys; missing keys keep their defaults.
ExtractorConfig extractor_config_from_json(const Json& j,
                                           ExtractorConfig base = {});

inline constexpr std::size_t kDefaultSeqLen = 12;

// Sliding windows, stride 1. `data` holds one column per window laid out
// time-major: row t * channels + c is channel c at step t.
struct WindowBatch {
  nn::Matrix data;
  std::size_t seq_len = kDefaultSeqLen;
  std::vector<SourceId> channel_sources;

  std::size_t size() const { return static_cast<std::size_t>(data.cols()); }
  std::size_t channels() const { return channel_sources.size(); }
  WindowBatch select(const std::vector<std::size_t>& indices) const;
};

WindowBatch make_windows(const TimeSeriesTable& table,
                         const std::vector<SourceId>& sources,
                         std::size_t seq_len = kDefaultSeqLen);

// Rows are windows: bottleneck activations followed by error scalars.
using FeatureMatrix = Eigen::MatrixXd;

// Which objective a gradient query refers to. Autoencoders only have kPrimary;
// USAD uses kPrimary for L_AE1 and kSecondary for L_AE2.
enum class Objective { kPrimary, kSecondary };

class ExtractorModel {
 public:
  virtual ~ExtractorModel() = default;

  virtual ExtractorKind kind() const = 0;
  virtual std::unique_ptr<ExtractorModel> clone() const = 0;
  virtual std::vector<nn::Param*> params() = 0;
  std::vector<const nn::Param*> params() const;

  // Objective value on a batch (column-per-window). Gradients of every
  // parameter are overwritten with the exact derivative. `epoch` is 1-based
  // and only matters for USAD's weighting.
  virtual double loss_and_gradient(const nn::Matrix& x, Objective objective,
                                   int epoch) = 0;
  // Value only, for finite differences.
  virtual double loss(const nn::Matrix& x, Objective objective,
                      int epoch) const = 0;

  virtual int latent_dim() const = 0;
  virtual int error_dims() const = 0;
  // Bottleneck (latent_dim rows) and per-window reconstruction errors
  // (error_dims rows), column per window.
  virtual void features(const nn::Matrix& x, nn::Matrix& latent,
                        nn::Matrix& errors) const = 0;

  // One optimisation pass over a minibatch; returns the loss(es) before the
  // update.
  virtual std::vector<double> train_step(const nn::Matrix& x, int epoch) = 0;
  virtual void make_optimizers(const nn::AdamSettings& settings) = 0;
};

std::unique_ptr<ExtractorModel> make_initial_model(const ExtractorConfig& cfg,
                                                   std::size_t seq_len,
                                                   std::size_t channels);

class TrainedExtractor {
 public:
  TrainedExtractor() = default;
  TrainedExtractor(ExtractorConfig cfg, std::size_t seq_len,
                   std::vector<SourceId> channels,
                   std::shared_ptr<const ExtractorModel> model,
                   std::vector<double> loss_curve,
                   std::vector<double> aux_loss_curve);

  ExtractorKind kind() const { return config_.kind; }
  const ExtractorConfig& config() const { return config_; }
  std::size_t seq_len() const { return seq_len_; }
  const std::vector<SourceId>& channel_sources() const { return channels_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }
  // Secondary objective per epoch (USAD's L_AE2); empty otherwise.
  const std::vector<double>& aux_loss_curve() const { return aux_loss_curve_; }
  const ExtractorModel& model() const { return *model_; }

  std::size_t feature_width() const;
  // Throws ShapeMismatch if the batch layout differs from training.
  FeatureMatrix encode(const WindowBatch& batch) const;

  std::string serialize() const;
  static TrainedExtractor deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static TrainedExtractor load(const std::filesystem::path& path);

 private:
  ExtractorConfig config_;
  std::size_t seq_len_ = kDefaultSeqLen;
  std::vector<SourceId> channels_;
  std::shared_ptr<const ExtractorModel> model_;
  std::vector<double> loss_curve_;
  std::vector<double> aux_loss_curve_;
};

// Trains on normal-only windows. Throws NonFiniteLoss on divergence.
TrainedExtractor train_extractor(const WindowBatch& train,
                                 const ExtractorConfig& cfg);
TrainedExtractor train_dense_ae(const WindowBatch& train, ExtractorConfig cfg);
TrainedExtractor train_lstm_ae(const WindowBatch& train, ExtractorConfig cfg);
TrainedExtractor train_usad(const WindowBatch& train, ExtractorConfig cfg);

// alpha * ||W - D1(E(W))||^2 + beta * ||W - D2(E(D1(E(W))))||^2 per window,
// errors normalised by element count.
std::vector<double> usad_anomaly_score(const TrainedExtractor& ex,
                                       const WindowBatch& batch,
                                       double alpha = 0.5, double beta = 0.5);

}  // namespace multien
