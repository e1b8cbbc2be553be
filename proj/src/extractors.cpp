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

#include "multien/extractors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "multien/error.hpp"

namespace multien {
namespace {

using nn::Activation;
using nn::Dense;
using nn::Lstm;
using nn::Matrix;
using nn::Mlp;

constexpr char kMagic[] = "MENX1";
constexpr std::size_t kMagicLen = 5;
constexpr int kFormatVersion = 1;

double mse(const Matrix& a, const Matrix& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

// d/d(pred) of weight * mse(target, pred).
Matrix mse_grad(const Matrix& target, const Matrix& pred, double weight) {
  return (2.0 * weight / static_cast<double>(target.size())) * (pred - target);
}

Matrix per_window_error(const Matrix& x, const Matrix& xh) {
  return (x - xh).colwise().squaredNorm() / static_cast<double>(x.rows());
}

void zero_all(const std::vector<nn::Param*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

void append(std::vector<nn::Param*>& out, std::vector<nn::Param*> more) {
  out.insert(out.end(), more.begin(), more.end());
}

Mlp make_encoder(const std::string& name, int in, int hidden, int latent) {
  return Mlp({Dense(name + ".0", in, hidden, Activation::kTanh),
              Dense(name + ".1", hidden, latent, Activation::kIdentity)});
}

Mlp make_decoder(const std::string& name, int latent, int hidden, int out,
                 Activation out_act) {
  return Mlp({Dense(name + ".0", latent, hidden, Activation::kTanh),
              Dense(name + ".1", hidden, out, out_act)});
}

nn::AdamSettings adam_settings(const ExtractorConfig& cfg) {
  return {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
}

// ---------------------------------------------------------------------------

class DenseAutoencoder final : public ExtractorModel {
 public:
  DenseAutoencoder(int in, int hidden, int latent)
      : latent_(latent),
        encoder_(make_encoder("encoder", in, hidden, latent)),
        decoder_(make_decoder("decoder", latent, hidden, in,
                              Activation::kIdentity)) {}

  void init(std::mt19937_64& rng) {
    encoder_.init(rng);
    decoder_.init(rng);
  }

  ExtractorKind kind() const override { return ExtractorKind::kDenseAe; }
  std::unique_ptr<ExtractorModel> clone() const override {
    return std::make_unique<DenseAutoencoder>(*this);
  }
  std::vector<nn::Param*> params() override {
    auto out = encoder_.params();
    append(out, decoder_.params());
    return out;
  }
  int latent_dim() const override { return latent_; }
  int error_dims() const override { return 1; }

  double loss(const Matrix& x, Objective, int) const override {
    return mse(x, decoder_.forward(encoder_.forward(x)));
  }

  double loss_and_gradient(const Matrix& x, Objective, int) override {
    zero_all(params());
    Mlp::Trace te, td;
    const Matrix z = encoder_.forward(x, &te);
    const Matrix xh = decoder_.forward(z, &td);
    const Matrix dz = decoder_.backward(td, mse_grad(x, xh, 1.0));
    encoder_.backward(te, dz);
    return mse(x, xh);
  }

  void features(const Matrix& x, Matrix& latent,
                Matrix& errors) const override {
    latent = encoder_.forward(x);
    errors = per_window_error(x, decoder_.forward(latent));
  }

  void make_optimizers(const nn::AdamSettings& s) override {
    opt_ = nn::Adam(params(), s);
  }

  std::vector<double> train_step(const Matrix& x, int epoch) override {
    const double l = loss_and_gradient(x, Objective::kPrimary, epoch);
    opt_.step();
    return {l};
  }

 private:
  int latent_;
  Mlp encoder_;
  Mlp decoder_;
  nn::Adam opt_;
};

// ---------------------------------------------------------------------------

class LstmAutoencoder final : public ExtractorModel {
 public:
  LstmAutoencoder(int seq_len, int channels, int hidden, int latent)
      : seq_len_(seq_len),
        channels_(channels),
        latent_(latent),
        encoder_("encoder.lstm", channels, hidden),
        to_latent_("encoder.latent", hidden, latent, Activation::kIdentity),
        decoder_("decoder.lstm", latent, hidden),
        output_("decoder.output", hidden, channels, Activation::kIdentity) {}

  void init(std::mt19937_64& rng) {
    encoder_.init(rng);
    to_latent_.init(rng);
    decoder_.init(rng);
    output_.init(rng);
  }

  ExtractorKind kind() const override { return ExtractorKind::kLstmAe; }
  std::unique_ptr<ExtractorModel> clone() const override {
    return std::make_unique<LstmAutoencoder>(*this);
  }
  std::vector<nn::Param*> params() override {
    auto out = encoder_.params();
    out.push_back(&to_latent_.weight);
    out.push_back(&to_latent_.bias);
    append(out, decoder_.params());
    out.push_back(&output_.weight);
    out.push_back(&output_.bias);
    return out;
  }
  int latent_dim() const override { return latent_; }
  int error_dims() const override { return 1; }

  double loss(const Matrix& x, Objective, int) const override {
    Matrix z;
    return mse(x, reconstruct(x, z));
  }

  double loss_and_gradient(const Matrix& x, Objective, int) override {
    zero_all(params());
    const Eigen::Index b = x.cols();
    Lstm::Trace te, tdec;
    Dense::Trace tl, to;
    const auto hs = encoder_.forward(steps(x), &te);
    const Matrix z = to_latent_.forward(hs.back(), &tl);
    const std::vector<Matrix> zin(static_cast<std::size_t>(seq_len_), z);
    const auto hd = decoder_.forward(zin, &tdec);
    const Matrix stacked = hstack(hd);
    const Matrix y = output_.forward(stacked, &to);
    const Matrix xh = unstack(y, b);

    const Matrix d_xh = mse_grad(x, xh, 1.0);
    const Matrix d_stacked = output_.backward(to, stack_like(d_xh, b));
    std::vector<Matrix> d_hd(static_cast<std::size_t>(seq_len_));
    for (int t = 0; t < seq_len_; ++t) {
      d_hd[static_cast<std::size_t>(t)] = d_stacked.middleCols(t * b, b);
    }
    const auto d_zin = decoder_.backward(tdec, d_hd);
    Matrix dz = Matrix::Zero(latent_, b);
    for (const auto& d : d_zin) dz += d;
    const Matrix dh_last = to_latent_.backward(tl, dz);
    std::vector<Matrix> d_he(static_cast<std::size_t>(seq_len_));
    d_he.back() = dh_last;
    encoder_.backward(te, d_he);
    return mse(x, xh);
  }

  void features(const Matrix& x, Matrix& latent,
                Matrix& errors) const override {
    const Matrix xh = reconstruct(x, latent);
    errors = per_window_error(x, xh);
  }

  void make_optimizers(const nn::AdamSettings& s) override {
    opt_ = nn::Adam(params(), s);
  }

  std::vector<double> train_step(const Matrix& x, int epoch) override {
    const double l = loss_and_gradient(x, Objective::kPrimary, epoch);
    opt_.step();
    return {l};
  }

 private:
  std::vector<Matrix> steps(const Matrix& x) const {
    std::vector<Matrix> xs;
    xs.reserve(static_cast<std::size_t>(seq_len_));
    for (int t = 0; t < seq_len_; ++t) {
      xs.push_back(x.middleRows(t * channels_, channels_));
    }
    return xs;
  }

  static Matrix hstack(const std::vector<Matrix>& hs) {
    const Eigen::Index b = hs.front().cols();
    Matrix out(hs.front().rows(), b * static_cast<Eigen::Index>(hs.size()));
    for (std::size_t t = 0; t < hs.size(); ++t) {
      out.middleCols(static_cast<Eigen::Index>(t) * b, b) = hs[t];
    }
    return out;
  }

  // (channels, T*b) step-major blocks -> (T*channels, b) windows.
  Matrix unstack(const Matrix& y, Eigen::Index b) const {
    Matrix out(seq_len_ * channels_, b);
    for (int t = 0; t < seq_len_; ++t) {
      out.middleRows(t * channels_, channels_) = y.middleCols(t * b, b);
    }
    return out;
  }

  Matrix stack_like(const Matrix& x, Eigen::Index b) const {
    Matrix out(channels_, seq_len_ * b);
    for (int t = 0; t < seq_len_; ++t) {
      out.middleCols(t * b, b) = x.middleRows(t * channels_, channels_);
    }
    return out;
  }

  Matrix reconstruct(const Matrix& x, Matrix& z) const {
    const auto hs = encoder_.forward(steps(x));
    z = to_latent_.forward(hs.back());
    const std::vector<Matrix> zin(static_cast<std::size_t>(seq_len_), z);
    return unstack(output_.forward(hstack(decoder_.forward(zin))), x.cols());
  }

  int seq_len_;
  int channels_;
  int latent_;
  Lstm encoder_;
  Dense to_latent_;
  Lstm decoder_;
  Dense output_;
  nn::Adam opt_;
};

// ---------------------------------------------------------------------------

class UsadModel final : public ExtractorModel {
 public:
  UsadModel(int in, int hidden, int latent)
      : latent_(latent),
        encoder_(make_encoder("encoder", in, hidden, latent)),
        decoder1_(make_decoder("decoder1", latent, hidden, in,
                               Activation::kSigmoid)),
        decoder2_(make_decoder("decoder2", latent, hidden, in,
                               Activation::kSigmoid)) {}

  void init(std::mt19937_64& rng) {
    encoder_.init(rng);
    decoder1_.init(rng);
    decoder2_.init(rng);
  }

  ExtractorKind kind() const override { return ExtractorKind::kUsad; }
  std::unique_ptr<ExtractorModel> clone() const override {
    auto c = std::make_unique<UsadModel>(*this);
    return c;
  }
  std::vector<nn::Param*> params() override {
    auto out = encoder_.params();
    append(out, decoder1_.params());
    append(out, decoder2_.params());
    return out;
  }
  int latent_dim() const override { return latent_; }
  int error_dims() const override { return 2; }

  static std::pair<double, double> weights(int epoch) {
    const double n = static_cast<double>(std::max(epoch, 1));
    return {1.0 / n, 1.0 - 1.0 / n};
  }

  double loss(const Matrix& x, Objective objective, int epoch) const override {
    const auto [w1, w2] = weights(epoch);
    const Matrix z = encoder_.forward(x);
    const Matrix r1 = decoder1_.forward(z);
    const Matrix r3 = decoder2_.forward(encoder_.forward(r1));
    if (objective == Objective::kPrimary) {
      return w1 * mse(x, r1) + w2 * mse(x, r3);
    }
    const Matrix r2 = decoder2_.forward(z);
    return w1 * mse(x, r2) - w2 * mse(x, r3);
  }

  double loss_and_gradient(const Matrix& x, Objective objective,
                           int epoch) override {
    zero_all(params());
    const auto [w1, w2] = weights(epoch);
    Mlp::Trace te, td1, te2, td2b;
    const Matrix z = encoder_.forward(x, &te);
    const Matrix r1 = decoder1_.forward(z, &td1);
    const Matrix z2 = encoder_.forward(r1, &te2);
    const Matrix r3 = decoder2_.forward(z2, &td2b);

    const double sign = objective == Objective::kPrimary ? 1.0 : -1.0;
    // Adversarial path W -> E -> D1 -> E -> D2.
    const Matrix dz2 = decoder2_.backward(td2b, mse_grad(x, r3, sign * w2));
    Matrix dr1 = encoder_.backward(te2, dz2);
    double value = sign * w2 * mse(x, r3);
    Matrix dz;
    if (objective == Objective::kPrimary) {
      dr1 += mse_grad(x, r1, w1);
      value += w1 * mse(x, r1);
      dz = decoder1_.backward(td1, dr1);
    } else {
      dz = decoder1_.backward(td1, dr1);
      Mlp::Trace td2a;
      const Matrix r2 = decoder2_.forward(z, &td2a);
      dz += decoder2_.backward(td2a, mse_grad(x, r2, w1));
      value += w1 * mse(x, r2);
    }
    encoder_.backward(te, dz);
    return value;
  }

  void features(const Matrix& x, Matrix& latent,
                Matrix& errors) const override {
    latent = encoder_.forward(x);
    const Matrix r1 = decoder1_.forward(latent);
    const Matrix r3 = decoder2_.forward(encoder_.forward(r1));
    errors.resize(2, x.cols());
    errors.row(0) = per_window_error(x, r1);
    errors.row(1) = per_window_error(x, r3);
  }

  void make_optimizers(const nn::AdamSettings& s) override {
    auto p1 = encoder_.params();
    append(p1, decoder1_.params());
    opt1_ = nn::Adam(p1, s);
    auto p2 = encoder_.params();
    append(p2, decoder2_.params());
    opt2_ = nn::Adam(p2, s);
  }

  std::vector<double> train_step(const Matrix& x, int epoch) override {
    const double l1 = loss_and_gradient(x, Objective::kPrimary, epoch);
    opt1_.step();
    const double l2 = loss_and_gradient(x, Objective::kSecondary, epoch);
    opt2_.step();
    return {l1, l2};
  }

 private:
  int latent_;
  Mlp encoder_;
  Mlp decoder1_;
  Mlp decoder2_;
  nn::Adam opt1_;
  nn::Adam opt2_;
};

void validate(const ExtractorConfig& cfg) {
  if (cfg.latent_dim <= 0 || cfg.hidden_dim <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "extractor dims must be positive");
  }
  if (cfg.epochs < 0 || cfg.batch_size <= 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "epochs must be >= 0 and batch_size > 0");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be positive");
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k]))
         << (8 * k);
  }
  return v;
}

void put_double(std::string& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

}  // namespace

std::string_view to_string(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kDenseAe: return "dense_ae";
    case ExtractorKind::kLstmAe: return "lstm_ae";
    case ExtractorKind::kUsad: return "usad";
  }
  return "usad";
}

ExtractorKind extractor_kind_from_string(std::string_view name) {
  if (name == "dense_ae") return ExtractorKind::kDenseAe;
  if (name == "lstm_ae") return ExtractorKind::kLstmAe;
  if (name == "usad") return ExtractorKind::kUsad;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown extractor kind '" + std::string(name) + "'");
}

Json extractor_config_to_json(const ExtractorConfig& cfg) {
  return Json{{"kind", to_string(cfg.kind)},
              {"latent_dim", cfg.latent_dim},
              {"hidden_dim", cfg.hidden_dim},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"epsilon", cfg.epsilon},
              {"rng_seed", cfg.rng_seed},
              {"include_error", cfg.include_error}};
}

ExtractorConfig extractor_config_from_json(const Json& j, ExtractorConfig cfg) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidConfig, "extractor config must be an object");
  }
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kind") cfg.kind = extractor_kind_from_string(v.get<std::string>());
      else if (key == "latent_dim") cfg.latent_dim = v.get<int>();
      else if (key == "hidden_dim") cfg.hidden_dim = v.get<int>();
      else if (key == "epochs") cfg.epochs = v.get<int>();
      else if (key == "batch_size") cfg.batch_size = v.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = v.get<double>();
      else if (key == "beta1") cfg.beta1 = v.get<double>();
      else if (key == "beta2") cfg.beta2 = v.get<double>();
      else if (key == "epsilon") cfg.epsilon = v.get<double>();
      else if (key == "rng_seed") cfg.rng_seed = v.get<std::uint64_t>();
      else if (key == "include_error") cfg.include_error = v.get<bool>();
      else if (key == "optimizer") {
        if (v.get<std::string>() != "adam") {
          throw Error(ErrorCode::kInvalidConfig, "only the adam optimizer is supported");
        }
      } else {
        throw Error(ErrorCode::kInvalidConfig,
                    "unknown extractor config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("bad extractor config: ") + ex.what());
  }
  validate(cfg);
  return cfg;
}

WindowBatch WindowBatch::select(const std::vector<std::size_t>& indices) const {
  WindowBatch out;
  out.seq_len = seq_len;
  out.channel_sources = channel_sources;
  out.data.resize(data.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.data.col(static_cast<Eigen::Index>(k)) =
        data.col(static_cast<Eigen::Index>(indices[k]));
  }
  return out;
}

WindowBatch make_windows(const TimeSeriesTable& table,
                         const std::vector<SourceId>& sources,
                         std::size_t seq_len) {
  if (seq_len == 0) {
    throw Error(ErrorCode::kInvalidConfig, "seq_len must be positive");
  }
  const std::size_t rows = table.rows();
  if (rows < seq_len) {
    throw Error(ErrorCode::kTooShort,
                "table has " + std::to_string(rows) + " rows, window needs " +
                    std::to_string(seq_len));
  }
  std::vector<std::span<const double>> cols;
  for (const auto& s : sources) cols.push_back(table.column(s));
  const std::size_t c = sources.size();
  const std::size_t n = rows - seq_len + 1;
  WindowBatch out;
  out.seq_len = seq_len;
  out.channel_sources = sources;
  out.data.resize(static_cast<Eigen::Index>(seq_len * c),
                  static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = cols[ch][k + t];
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kNonFiniteFeature,
                      "non-finite value in source '" + sources[ch].str() +
                          "' at row " + std::to_string(k + t));
        }
        out.data(static_cast<Eigen::Index>(t * c + ch),
                 static_cast<Eigen::Index>(k)) = v;
      }
    }
  }
  return out;
}

std::vector<const nn::Param*> ExtractorModel::params() const {
  auto ps = const_cast<ExtractorModel*>(this)->params();
  return {ps.begin(), ps.end()};
}

std::unique_ptr<ExtractorModel> make_initial_model(const ExtractorConfig& cfg,
                                                   std::size_t seq_len,
                                                   std::size_t channels) {
  validate(cfg);
  if (seq_len == 0 || channels == 0) {
    throw Error(ErrorCode::kShapeMismatch, "extractor needs a non-empty window");
  }
  const int in = static_cast<int>(seq_len * channels);
  std::mt19937_64 rng(cfg.rng_seed);
  switch (cfg.kind) {
    case ExtractorKind::kDenseAe: {
      auto m = std::make_unique<DenseAutoencoder>(in, cfg.hidden_dim, cfg.latent_dim);
      m->init(rng);
      return m;
    }
    case ExtractorKind::kLstmAe: {
      auto m = std::make_unique<LstmAutoencoder>(
          static_cast<int>(seq_len), static_cast<int>(channels), cfg.hidden_dim,
          cfg.latent_dim);
      m->init(rng);
      return m;
    }
    case ExtractorKind::kUsad: {
      auto m = std::make_unique<UsadModel>(in, cfg.hidden_dim, cfg.latent_dim);
      m->init(rng);
      return m;
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown extractor kind");
}

TrainedExtractor::TrainedExtractor(ExtractorConfig cfg, std::size_t seq_len,
                                   std::vector<SourceId> channels,
                                   std::shared_ptr<const ExtractorModel> model,
                                   std::vector<double> loss_curve,
                                   std::vector<double> aux_loss_curve)
    : config_(cfg),
      seq_len_(seq_len),
      channels_(std::move(channels)),
      model_(std::move(model)),
      loss_curve_(std::move(loss_curve)),
      aux_loss_curve_(std::move(aux_loss_curve)) {}

std::size_t TrainedExtractor::feature_width() const {
  return static_cast<std::size_t>(model_->latent_dim()) +
         (config_.include_error ? static_cast<std::size_t>(model_->error_dims())
                                : 0);
}

FeatureMatrix TrainedExtractor::encode(const WindowBatch& batch) const {
  if (batch.seq_len != seq_len_ || batch.channel_sources != channels_) {
    throw Error(ErrorCode::kShapeMismatch,
                "window layout differs from the extractor's training layout");
  }
  const std::size_t n = batch.size();
  FeatureMatrix out(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(feature_width()));
  // Fixed-width chunks keep every window's arithmetic independent of n.
  constexpr std::size_t kChunk = 4096;
  Matrix latent, errors;
  Matrix padded;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const auto len = static_cast<Eigen::Index>(std::min(kChunk, n - start));
    const auto s = static_cast<Eigen::Index>(start);
    if (len == static_cast<Eigen::Index>(kChunk)) {
      model_->features(batch.data.middleCols(s, len), latent, errors);
    } else {
      padded = Matrix::Zero(batch.data.rows(), static_cast<Eigen::Index>(kChunk));
      padded.leftCols(len) = batch.data.middleCols(s, len);
      model_->features(padded, latent, errors);
    }
    out.block(s, 0, len, latent.rows()) = latent.leftCols(len).transpose();
    if (config_.include_error) {
      out.block(s, latent.rows(), len, errors.rows()) = errors.leftCols(len).transpose();
    }
  }
  if (!out.allFinite()) {
    throw Error(ErrorCode::kNonFiniteFeature, "extractor produced non-finite features");
  }
  return out;
}

std::string TrainedExtractor::serialize() const {
  Json header;
  header["format"] = "MENX1";
  header["version"] = kFormatVersion;
  header["kind"] = to_string(config_.kind);
  header["config"] = extractor_config_to_json(config_);
  header["seq_len"] = seq_len_;
  header["channels"] = to_names(channels_);
  header["loss_curve"] = loss_curve_;
  header["aux_loss_curve"] = aux_loss_curve_;
  Json tensors = Json::array();
  const auto ps = model_->params();
  for (const auto* p : ps) {
    tensors.push_back(
        {{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["tensors"] = tensors;
  const std::string h = header.dump();
  std::string out(kMagic, kMagicLen);
  put_u64(out, h.size());
  out += h;
  for (const auto* p : ps) {
    const double* d = p->value.data();
    for (Eigen::Index k = 0; k < p->value.size(); ++k) put_double(out, d[k]);
  }
  return out;
}

TrainedExtractor TrainedExtractor::deserialize(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0) {
    throw Error(ErrorCode::kParseError, "not an MENX1 extractor file");
  }
  const std::uint64_t hlen = get_u64(bytes, kMagicLen);
  const std::size_t body = kMagicLen + 8 + hlen;
  if (body > bytes.size()) {
    throw Error(ErrorCode::kParseError, "truncated MENX1 header");
  }
  Json header;
  try {
    header = Json::parse(bytes.substr(kMagicLen + 8, hlen));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad MENX1 header: ") + ex.what());
  }
  try {
    if (header.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kParseError, "unsupported MENX1 version");
    }
    const ExtractorConfig cfg = extractor_config_from_json(header.at("config"));
    const auto seq_len = header.at("seq_len").get<std::size_t>();
    auto channels =
        to_source_ids(header.at("channels").get<std::vector<std::string>>());
    auto model = make_initial_model(cfg, seq_len, channels.size());
    auto ps = model->params();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != ps.size()) {
      throw Error(ErrorCode::kShapeMismatch, "MENX1 tensor count mismatch");
    }
    std::size_t pos = body;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto& p = *ps[k];
      const auto& t = tensors[k];
      if (t.at("name").get<std::string>() != p.name ||
          t.at("rows").get<Eigen::Index>() != p.value.rows() ||
          t.at("cols").get<Eigen::Index>() != p.value.cols()) {
        throw Error(ErrorCode::kShapeMismatch,
                    "MENX1 tensor '" + p.name + "' does not match the config");
      }
      const auto count = static_cast<std::size_t>(p.value.size());
      if (pos + 8 * count > bytes.size()) {
        throw Error(ErrorCode::kParseError, "truncated MENX1 tensor data");
      }
      double* d = p.value.data();
      for (std::size_t e = 0; e < count; ++e, pos += 8) {
        d[e] = std::bit_cast<double>(get_u64(bytes, pos));
      }
      p.zero_grad();
    }
    if (pos != bytes.size()) {
      throw Error(ErrorCode::kParseError, "trailing bytes after MENX1 tensors");
    }
    return TrainedExtractor(
        cfg, seq_len, std::move(channels), std::move(model),
        header.at("loss_curve").get<std::vector<double>>(),
        header.at("aux_loss_curve").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParseError, std::string("bad MENX1 header: ") + ex.what());
  }
}

void TrainedExtractor::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainedExtractor TrainedExtractor::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

TrainedExtractor train_extractor(const WindowBatch& train,
                                 const ExtractorConfig& cfg) {
  validate(cfg);
  if (train.size() == 0) {
    throw Error(ErrorCode::kTooShort, "no training windows");
  }
  if (train.data.rows() !=
      static_cast<Eigen::Index>(train.seq_len * train.channels())) {
    throw Error(ErrorCode::kShapeMismatch, "window batch rows != seq_len * channels");
  }
  std::shared_ptr<ExtractorModel> model =
      make_initial_model(cfg, train.seq_len, train.channels());
  model->make_optimizers(adam_settings(cfg));

  // Separate stream from initialisation so shuffles do not shift weights.
  std::mt19937_64 shuffle_rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::vector<double> curve, aux;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  Matrix xb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum = 0.0, sum_aux = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_index) {
      const std::size_t len = std::min(bs, order.size() - start);
      xb.resize(train.data.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        xb.col(static_cast<Eigen::Index>(k)) =
            train.data.col(static_cast<Eigen::Index>(order[start + k]));
      }
      const auto losses = model->train_step(xb, epoch);
      for (double l : losses) {
        if (!std::isfinite(l)) {
          throw Error(ErrorCode::kNonFiniteLoss,
                      std::string(to_string(cfg.kind)) +
                          " loss became non-finite at epoch " +
                          std::to_string(epoch) + ", batch " +
                          std::to_string(batch_index) + " (learning_rate " +
                          std::to_string(cfg.learning_rate) + ")");
        }
      }
      sum += losses[0] * static_cast<double>(len);
      if (losses.size() > 1) sum_aux += losses[1] * static_cast<double>(len);
    }
    const double n = static_cast<double>(order.size());
    curve.push_back(sum / n);
    if (cfg.kind == ExtractorKind::kUsad) aux.push_back(sum_aux / n);
  }
  return TrainedExtractor(cfg, train.seq_len, train.channel_sources,
                          std::move(model), std::move(curve), std::move(aux));
}

TrainedExtractor train_dense_ae(const WindowBatch& train, ExtractorConfig cfg) {
  cfg.kind = ExtractorKind::kDenseAe;
  return train_extractor(train, cfg);
}

TrainedExtractor train_lstm_ae(const WindowBatch& train, ExtractorConfig cfg) {
  cfg.kind = ExtractorKind::kLstmAe;
  return train_extractor(train, cfg);
}

TrainedExtractor train_usad(const WindowBatch& train, ExtractorConfig cfg) {
  cfg.kind = ExtractorKind::kUsad;
  return train_extractor(train, cfg);
}

std::vector<double> usad_anomaly_score(const TrainedExtractor& ex,
                                       const WindowBatch& batch, double alpha,
                                       double beta) {
  if (ex.kind() != ExtractorKind::kUsad) {
    throw Error(ErrorCode::kInvalidConfig, "anomaly score needs a usad extractor");
  }
  if (batch.seq_len != ex.seq_len() || batch.channel_sources != ex.channel_sources()) {
    throw Error(ErrorCode::kShapeMismatch,
                "window layout differs from the extractor's training layout");
  }
  Matrix latent, errors;
  ex.model().features(batch.data, latent, errors);
  std::vector<double> out(batch.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    out[k] = alpha * errors(0, c) + beta * errors(1, c);
  }
  return out;
}

}  // namespace multien
