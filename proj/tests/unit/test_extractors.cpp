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

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "multien/error.hpp"
#include "multien/evaluation.hpp"
#include "multien/extractors.hpp"
#include "multien/synthgen.hpp"
#include "support.hpp"

using namespace multien;
using nn::Matrix;

namespace {

WindowBatch batch_of(const Matrix& data, std::size_t seq_len, std::size_t channels) {
  WindowBatch b;
  b.data = data;
  b.seq_len = seq_len;
  for (std::size_t c = 0; c < channels; ++c) b.channel_sources.emplace_back("c" + std::to_string(c));
  return b;
}

Matrix uniform_matrix(int r, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

ExtractorConfig small_config(ExtractorKind kind, std::uint64_t seed) {
  ExtractorConfig cfg;
  cfg.kind = kind;
  cfg.latent_dim = 3;
  cfg.hidden_dim = 5;
  cfg.rng_seed = seed;
  return cfg;
}

// Norm-relative error between the analytic gradient and central differences
// over every parameter entry.
double gradient_error(ExtractorModel& model, const Matrix& x, Objective obj, int epoch) {
  model.loss_and_gradient(x, obj, epoch);
  const double h = 1e-5;
  double diff = 0.0, a = 0.0, b = 0.0;
  for (auto* p : model.params()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double orig = p->value.data()[k];
      p->value.data()[k] = orig + h;
      const double up = model.loss(x, obj, epoch);
      p->value.data()[k] = orig - h;
      const double down = model.loss(x, obj, epoch);
      p->value.data()[k] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = p->grad.data()[k];
      diff += (num - ana) * (num - ana);
      a += ana * ana;
      b += num * num;
    }
  }
  return std::sqrt(diff) / (std::sqrt(a) + std::sqrt(b));
}

// Sinusoid windows, one column per window, time-major over `channels`.
Matrix sine_windows(std::size_t n, std::size_t seq_len, std::size_t channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  std::normal_distribution<double> noise(0.0, 0.01);
  Matrix m(static_cast<Eigen::Index>(seq_len * channels), static_cast<Eigen::Index>(n));
  for (std::size_t w = 0; w < n; ++w) {
    const double ph = phase(rng);
    for (std::size_t t = 0; t < seq_len; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = 0.5 + 0.3 * std::sin(ph + 0.5 * static_cast<double>(t) + static_cast<double>(c));
        m(static_cast<Eigen::Index>(t * channels + c), static_cast<Eigen::Index>(w)) = v + noise(rng);
      }
    }
  }
  return m;
}


// Mean over windows of the summed error columns, split by whether the window
// covers an individual spike.
struct ErrorSplit {
  double welch_t = 0.0;
  double anomalous = 0.0;
  double normal = 0.0;
};

ErrorSplit held_out_errors(ExtractorKind kind, std::uint64_t seed) {
  auto spec = default_synth_spec(seed);
  spec.length = 3000;
  spec.anomalies.rate_corrbreak = 0.0;
  spec.anomalies.rate_individual = 0.01;
  const auto synth = generate(spec);
  const std::size_t split = 2100;
  const auto scaled = apply_minmax(synth.table, fit_minmax(synth.table, {0, split}));
  const auto all = make_windows(scaled, scaled.sources(), 12);
  const auto spikes = synth.truth.mask(AnomalyType::kIndividual);
  std::vector<std::size_t> train_idx;
  std::vector<bool> hit(all.size(), false);
  for (std::size_t w = 0; w < all.size(); ++w) {
    for (std::size_t t = w; t < w + 12; ++t) hit[w] = hit[w] || spikes[t];
    if (w + 12 <= split && !hit[w]) train_idx.push_back(w);
  }
  auto cfg = small_config(kind, seed);
  cfg.latent_dim = 4;
  cfg.hidden_dim = 16;
  cfg.epochs = 30;
  cfg.batch_size = 128;
  const auto ex = train_extractor(all.select(train_idx), cfg);
  const auto f = ex.encode(all);
  const auto err_cols = static_cast<Eigen::Index>(ex.model().error_dims());
  std::vector<double> a, n;
  for (std::size_t w = split; w < all.size(); ++w) {
    const double e = f.row(static_cast<Eigen::Index>(w)).tail(err_cols).sum();
    (hit[w] ? a : n).push_back(e);
  }
  auto moments = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mn, vn] = moments(n);
  ErrorSplit out;
  out.anomalous = ma;
  out.normal = mn;
  out.welch_t = (ma - mn) / std::sqrt(va / static_cast<double>(a.size()) + vn / static_cast<double>(n.size()));
  return out;
}

}  // namespace

TEST_SUITE("extractors") {

TEST_CASE("windows are time-major") {
  const auto t = multien::test::make_table({"a", "b"}, {{1, 2, 3, 4, 5}, {10, 20, 30, 40, 50}});
  const auto w = make_windows(t, to_source_ids({"b", "a"}), 3);
  CHECK(w.size() == 3);
  CHECK(w.data.rows() == 6);
  CHECK(w.data(0, 0) == 10.0);
  CHECK(w.data(1, 0) == 1.0);
  CHECK(w.data(5, 2) == 5.0);
  CHECK(w.channel_sources == to_source_ids({"b", "a"}));
  const auto s = w.select({2, 0});
  CHECK(s.data(0, 0) == 30.0);
  CHECK(s.data(0, 1) == 10.0);
}

TEST_CASE("gradients match finite differences") {
  std::mt19937_64 rng(100);
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto model = make_initial_model(small_config(kind, seed), 4, 2);
      const Matrix x = uniform_matrix(8, 6, rng);
      CAPTURE(to_string(kind));
      CHECK(gradient_error(*model, x, Objective::kPrimary, 3) < 1e-4);
      if (kind == ExtractorKind::kUsad) {
        CHECK(gradient_error(*model, x, Objective::kSecondary, 3) < 1e-4);
        CHECK(gradient_error(*model, x, Objective::kSecondary, 1) < 1e-4);
      }
    }
  }
}

TEST_CASE("zero epochs keeps the initial parameters") {
  std::mt19937_64 rng(1);
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    auto cfg = small_config(kind, 7);
    cfg.epochs = 0;
    const auto batch = batch_of(uniform_matrix(8, 20, rng), 4, 2);
    const auto ex = train_extractor(batch, cfg);
    const auto init = make_initial_model(cfg, 4, 2);
    const auto a = ex.model().params();
    const auto b = static_cast<const ExtractorModel&>(*init).params();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k]->value == b[k]->value);
    CHECK(ex.loss_curve().empty());
  }
}

TEST_CASE("dense autoencoder recovers a two-dimensional subspace") {
  std::mt19937_64 rng(2);
  const Matrix basis = uniform_matrix(8, 2, rng, -0.5, 0.5);
  const Matrix z = uniform_matrix(2, 600, rng, -1.0, 1.0);
  Matrix x = basis * z;
  x.array() += 0.5;
  auto cfg = small_config(ExtractorKind::kDenseAe, 3);
  cfg.latent_dim = 2;
  cfg.hidden_dim = 16;
  cfg.epochs = 400;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.005;
  const auto ex = train_extractor(batch_of(x, 4, 2), cfg);
  CHECK(ex.loss_curve().back() < 1e-3);
}

TEST_CASE("lstm autoencoder reproduces a constant sequence") {
  const Matrix x = Matrix::Constant(6, 64, 0.5);
  auto cfg = small_config(ExtractorKind::kLstmAe, 4);
  cfg.hidden_dim = 8;
  cfg.latent_dim = 4;
  cfg.epochs = 300;
  cfg.batch_size = 64;
  const auto ex = train_extractor(batch_of(x, 6, 1), cfg);
  CHECK(ex.loss_curve().back() < 1e-4);
}

TEST_CASE("training is deterministic and the loss mostly decreases") {
  std::mt19937_64 rng(5);
  const auto batch = batch_of(sine_windows(300, 6, 2, rng), 6, 2);
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    auto cfg = small_config(kind, 11);
    cfg.epochs = 30;
    cfg.batch_size = 50;
    cfg.hidden_dim = 12;
    const auto a = train_extractor(batch, cfg);
    const auto b = train_extractor(batch, cfg);
    CHECK(a.loss_curve() == b.loss_curve());
    CHECK(a.serialize() == b.serialize());
    CAPTURE(to_string(kind));
    REQUIRE(a.loss_curve().size() == 30);
    // USAD's first objective grows with its adversarial weight; track the second.
    const auto& c = kind == ExtractorKind::kUsad ? a.aux_loss_curve() : a.loss_curve();
    REQUIRE(c.size() == 30);
    std::size_t down = 0;
    for (std::size_t k = 1; k < c.size(); ++k) down += c[k] <= c[k - 1];
    CHECK(static_cast<double>(down) >= 0.9 * static_cast<double>(c.size() - 1));
  }
}

TEST_CASE("encode is pure and has the documented width") {
  std::mt19937_64 rng(6);
  const auto batch = batch_of(sine_windows(50, 4, 2, rng), 4, 2);
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    auto cfg = small_config(kind, 1);
    cfg.epochs = 2;
    const auto ex = train_extractor(batch, cfg);
    const int errs = kind == ExtractorKind::kUsad ? 2 : 1;
    CHECK(ex.feature_width() == static_cast<std::size_t>(3 + errs));
    const auto before = ex.serialize();
    const auto f = ex.encode(batch);
    CHECK(f.rows() == 50);
    CHECK(f.cols() == 3 + errs);
    CHECK(ex.serialize() == before);
    CHECK(ex.encode(batch) == f);
    // Each window's features do not depend on its neighbours.
    const auto one = ex.encode(batch.select({17}));
    CHECK(one.row(0) == f.row(17));

    auto no_err = cfg;
    no_err.include_error = false;
    CHECK(train_extractor(batch, no_err).feature_width() == 3);

    auto wrong = batch;
    wrong.channel_sources = to_source_ids({"x", "y"});
    CHECK(multien::test::error_code([&] { ex.encode(wrong); }) == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("reconstruction error feature matches a direct recomputation") {
  std::mt19937_64 rng(7);
  const auto batch = batch_of(sine_windows(40, 4, 2, rng), 4, 2);
  auto cfg = small_config(ExtractorKind::kDenseAe, 2);
  cfg.epochs = 5;
  const auto ex = train_extractor(batch, cfg);
  Matrix latent, errors;
  ex.model().features(batch.data, latent, errors);
  // Rebuild the reconstruction from the model's own loss on single windows.
  for (Eigen::Index w = 0; w < 40; ++w) {
    const double per_window = ex.model().loss(batch.data.col(w), Objective::kPrimary, 1);
    CHECK(errors(0, w) == doctest::Approx(per_window).epsilon(1e-12));
  }
  const auto f = ex.encode(batch);
  CHECK(f(5, 3) == errors(0, 5));
  CHECK(f(5, 0) == latent(0, 5));
}

TEST_CASE("serialization round trip") {
  std::mt19937_64 rng(8);
  const auto batch = batch_of(sine_windows(60, 4, 2, rng), 4, 2);
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    auto cfg = small_config(kind, 3);
    cfg.epochs = 3;
    const auto ex = train_extractor(batch, cfg);
    const auto path = multien::test::scratch_dir("menx") / (std::string(to_string(kind)) + ".menx");
    ex.save(path);
    const auto back = TrainedExtractor::load(path);
    CHECK(back.kind() == kind);
    CHECK(back.loss_curve() == ex.loss_curve());
    CHECK(back.encode(batch) == ex.encode(batch));
    CHECK(back.serialize() == ex.serialize());
    auto bytes = ex.serialize();
    CHECK(multien::test::error_code([&] { TrainedExtractor::deserialize(bytes.substr(0, bytes.size() - 3)); }) ==
          ErrorCode::kParseError);
    bytes[0] = 'X';
    CHECK(multien::test::error_code([&] { TrainedExtractor::deserialize(bytes); }) == ErrorCode::kParseError);
  }
}

TEST_CASE("usad anomaly score separates anomalous windows") {
  std::mt19937_64 rng(9);
  const auto train = batch_of(sine_windows(800, 6, 2, rng), 6, 2);
  auto cfg = small_config(ExtractorKind::kUsad, 5);
  cfg.hidden_dim = 16;
  cfg.latent_dim = 4;
  cfg.epochs = 40;
  cfg.batch_size = 100;
  const auto ex = train_extractor(train, cfg);
  Matrix test = sine_windows(400, 6, 2, rng);
  std::vector<bool> labels(400, false);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index w = 0; w < 400; w += 4) {
    labels[static_cast<std::size_t>(w)] = true;
    for (Eigen::Index r = 0; r < test.rows(); ++r) test(r, w) = u(rng);
  }
  const auto scores = usad_anomaly_score(ex, batch_of(test, 6, 2));
  CHECK(auroc(scores, labels) > 0.7);
}

TEST_CASE("held-out spike windows reconstruct worse than normal windows") {
  for (auto kind : {ExtractorKind::kDenseAe, ExtractorKind::kLstmAe, ExtractorKind::kUsad}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CAPTURE(to_string(kind));
      CAPTURE(seed);
      const auto r = held_out_errors(kind, seed);
      CHECK(r.anomalous > r.normal);
      CHECK(r.welch_t > 2.0);
    }
  }
}

TEST_CASE("config json and validation") {
  ExtractorConfig cfg;
  cfg.kind = ExtractorKind::kLstmAe;
  cfg.latent_dim = 5;
  const auto back = extractor_config_from_json(extractor_config_to_json(cfg));
  CHECK(back.kind == ExtractorKind::kLstmAe);
  CHECK(back.latent_dim == 5);
  CHECK_THROWS_AS(extractor_config_from_json(Json{{"latent", 3}}), Error);
  CHECK_THROWS_AS(extractor_kind_from_string("gan"), Error);
  std::mt19937_64 rng(1);
  auto bad = small_config(ExtractorKind::kDenseAe, 0);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train_extractor(batch_of(uniform_matrix(8, 4, rng), 4, 2), bad), Error);
}

}  // TEST_SUITE
