// Copyright 2026 The unroll-tuner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "unroll_tuner/error.hpp"
#include "unroll_tuner/mlp.hpp"

namespace unroll_tuner {
namespace {

using M = MatrixX<double>;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

Architecture tiny(int input_width, std::vector<int> hidden, double dropout) {
  Architecture a;
  a.input_width = input_width;
  a.hidden = hidden;
  a.dropout.assign(hidden.size(), dropout);
  return a;
}

// Seven Gaussian blobs in `dims` dimensions; label k is centred at 4 * e_k.
void clusters(int rows, int dims, std::uint64_t seed, M& x, std::vector<int>& y) {
  Rng rng(seed);
  x.resize(rows, dims);
  y.resize(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) {
    const int k = r % 7;
    y[static_cast<std::size_t>(r)] = k;
    for (int c = 0; c < dims; ++c) x(r, c) = (c == k ? 4.0 : 0.0) + rng.uniform(-1, 1);
  }
}

TEST(SoftmaxTest, RowsSumToOneAndShiftInvariant) {
  Rng rng(1);
  M logits(5, 7);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-30, 30);
  const M p = softmax<double>(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  const M shifted = softmax<double>((logits.array() + 1000.0).matrix());
  EXPECT_LT((shifted - p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SoftmaxTest, UniformCrossEntropy) {
  const M p = softmax<double>(M::Zero(3, 7));
  EXPECT_NEAR(cross_entropy<double>(p, one_hot<double>({0, 3, 6}, 7)), std::log(7.0), 1e-12);
  EXPECT_EQ(code_of([] { one_hot<double>({7}, 7); }), ErrorCode::DimensionMismatch);
}

TEST(SoftmaxTest, ArgmaxTiesGoLow) {
  Eigen::RowVectorXd row(4);
  row << 0.1, 0.4, 0.4, 0.1;
  EXPECT_EQ(argmax_row(row), 1);
}

// Analytic gradients against central differences in extended precision.
TEST(MlpTest, GradientCheck) {
  using L = long double;
  using ML = MatrixX<L>;
  auto model = Mlp<L>::init(tiny(4, {6, 5}, 0.2), 3);
  Rng rng(4);
  ML x(8, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2, 2);
  const std::vector<int> y = {0, 1, 2, 3, 4, 5, 6, 2};
  const auto masks = model.draw_masks(x.rows(), rng);
  const auto [loss, grads] = model.loss_and_gradients(x, y, &masks);
  const L h = 1e-7L;
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
      L& w = (*params[k])(i);
      const L saved = w;
      w = saved + h;
      const L up = model.loss_and_gradients(x, y, &masks).first;
      w = saved - h;
      const L down = model.loss_and_gradients(x, y, &masks).first;
      w = saved;
      const L numeric = (up - down) / (2 * h);
      EXPECT_NEAR(static_cast<double>(grads[k](i)), static_cast<double>(numeric), 1e-6)
          << "parameter " << k << " entry " << i;
    }
  }
}

TEST(AdamTest, FirstStepsByHand) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<double> adam(cfg);
  M w = M::Constant(1, 1, 1.0);
  adam.step({&w}, {M::Constant(1, 1, 0.5)});
  // m_hat = 0.5, v_hat = 0.25: the step is lr * 0.5 / (0.5 + eps).
  EXPECT_NEAR(w(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  adam.step({&w}, {M::Constant(1, 1, -0.25)});
  const double m = 0.9 * 0.05 + 0.1 * -0.25;
  const double v = 0.999 * 0.00025 + 0.001 * 0.0625;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(AdamTest, ZeroGradientLeavesParameters) {
  Adam<double> adam(TrainConfig{});
  M w = M::Constant(2, 3, 0.7);
  adam.step({&w}, {M::Zero(2, 3)});
  EXPECT_EQ(w, M::Constant(2, 3, 0.7));
  EXPECT_EQ(code_of([&] { adam.step({&w}, {}); }), ErrorCode::DimensionMismatch);
}

TEST(MlpTest, InitShapesAndDeterminism) {
  const auto a = Mlp<double>::init(40, 9);
  const auto b = Mlp<double>::init(40, 9);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == Mlp<double>::init(40, 10));
  EXPECT_EQ(a.architecture().layer_dims(), (std::vector<int>{40, 500, 400, 250, 100, 7}));
  EXPECT_EQ(a.architecture().dropout, (std::vector<double>{0.12, 0.10, 0.04, 0.07}));
  const M& w0 = a.weight(0);
  EXPECT_EQ(w0.rows(), 40);
  EXPECT_EQ(w0.cols(), 500);
  const double limit = std::sqrt(6.0 / 540.0);
  EXPECT_LE(w0.cwiseAbs().maxCoeff(), limit);
  EXPECT_NEAR(w0.mean(), 0.0, 0.01 * limit);
  EXPECT_EQ(a.bias(4), M::Zero(1, 7));
  EXPECT_EQ(a.gamma(2), M::Ones(1, 250));
  EXPECT_EQ(a.running_var(3), M::Ones(1, 100));
  EXPECT_EQ(a.parameters().size(), 18u);
}

TEST(MlpTest, ArchitectureChecks) {
  Architecture a = tiny(3, {4}, 0.1);
  a.dropout = {};
  EXPECT_EQ(code_of([&] { Mlp<double>::init(a, 1); }), ErrorCode::DimensionMismatch);
  a = tiny(3, {4}, 1.0);
  EXPECT_EQ(code_of([&] { Mlp<double>::init(a, 1); }), ErrorCode::DimensionMismatch);
  const auto m = Mlp<double>::init(tiny(3, {4}, 0.1), 1);
  EXPECT_EQ(code_of([&] { m.forward(M::Zero(2, 5), Mode::Infer); }), ErrorCode::DimensionMismatch);
}

TEST(MlpTest, BatchNormStatistics) {
  auto m = Mlp<double>::init(tiny(5, {8}, 0.0), 2);
  Rng rng(3);
  M x(64, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-3, 7);
  const auto c = m.forward(x, Mode::Train);
  const M& xhat = c.xhat[0];
  for (Eigen::Index col = 0; col < xhat.cols(); ++col) {
    const double mean = xhat.col(col).mean();
    const double var = (xhat.col(col).array() - mean).square().mean();
    const double bv = c.batch_var[0](0, col);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, bv / (bv + 1e-5), 1e-10);
  }
  m.update_running_stats(c);
  EXPECT_LT((m.running_mean(0) - 0.1 * c.batch_mean[0]).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((m.running_var(0) - (M::Constant(1, 8, 0.9) + 0.1 * c.batch_var[0])).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(MlpTest, InferenceIsDeterministicPerRow) {
  const auto m = Mlp<double>::init(tiny(3, {6, 6}, 0.3), 5);
  M x(4, 3);
  x << 1, 2, 3, -1, 0, 1, 5, 5, 5, 0, 0, 0;
  const M all = m.predict_proba(x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    EXPECT_LT((m.predict_proba(x.row(r)) - all.row(r)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(DropoutTest, InvertedMasksKeepExpectation) {
  const auto m = Mlp<double>::init(8, 1);
  Rng rng(6);
  const auto masks = m.draw_masks(200, rng);
  ASSERT_EQ(masks.size(), 4u);
  const std::vector<double> p = {0.12, 0.10, 0.04, 0.07};
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const double keep = 1.0 / (1.0 - p[l]);
    const M& mk = masks[l];
    const auto zeros = (mk.array() == 0.0).count();
    EXPECT_EQ(zeros + (mk.array() == keep).count(), mk.size());
    EXPECT_NEAR(static_cast<double>(zeros) / static_cast<double>(mk.size()), p[l], 0.01);
    EXPECT_NEAR(mk.mean(), 1.0, 0.02);
  }
}

TEST(EarlyStoppingTest, PatienceOne) {
  EarlyStopping s(1);
  EXPECT_FALSE(s.update(3.0, 1));
  EXPECT_FALSE(s.update(2.0, 2));
  EXPECT_TRUE(s.update(2.5, 3));
  EXPECT_EQ(s.best_epoch(), 2);
  EXPECT_EQ(s.best_loss(), 2.0);
}

TEST(EarlyStoppingTest, EqualLossIsNotImprovement) {
  EarlyStopping s(2);
  s.update(1.0, 1);
  EXPECT_FALSE(s.update(1.0, 2));
  EXPECT_FALSE(s.improved());
  EXPECT_TRUE(s.update(1.0, 3));
}

TEST(TrainTest, HistoryAndBestSnapshot) {
  M xt, xv;
  std::vector<int> yt, yv;
  clusters(210, 7, 1, xt, yt);
  clusters(70, 7, 2, xv, yv);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 15;
  cfg.patience = 3;
  const auto r = train<double>(Mlp<double>::init(tiny(7, {16, 16}, 0.1), 1), xt, yt, xv, yv, cfg);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.history.size(), 15u);
  for (std::size_t e = 0; e < r.history.size(); ++e) EXPECT_EQ(r.history[e].epoch, static_cast<int>(e) + 1);
  int best = 1;
  for (const auto& h : r.history) {
    if (h.valid_loss < r.history[static_cast<std::size_t>(best - 1)].valid_loss) best = h.epoch;
  }
  EXPECT_EQ(r.best_epoch, best);
  EXPECT_TRUE(r.model.trained());
  const double snapshot_loss = cross_entropy<double>(r.model.predict_proba(xv), one_hot<double>(yv, 7));
  EXPECT_NEAR(snapshot_loss, r.history[static_cast<std::size_t>(best - 1)].valid_loss, 1e-12);
}

TEST(TrainTest, StopsAfterPatience) {
  M xt, xv;
  std::vector<int> yt, yv;
  clusters(70, 7, 3, xt, yt);
  clusters(70, 7, 4, xv, yv);
  TrainConfig cfg;
  cfg.max_epochs = 400;
  cfg.patience = 2;
  cfg.learning_rate = 0.05;
  const auto r = train<double>(Mlp<double>::init(tiny(7, {8}, 0.0), 2), xt, yt, xv, yv, cfg);
  EXPECT_LT(r.history.size(), 400u);
  EXPECT_EQ(static_cast<int>(r.history.size()), r.best_epoch + 2);
}

TEST(TrainTest, SeededRunsAreIdentical) {
  M xt, xv;
  std::vector<int> yt, yv;
  clusters(105, 7, 5, xt, yt);
  clusters(35, 7, 6, xv, yv);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const auto init = Mlp<double>::init(tiny(7, {12, 12}, 0.1), 7);
  const auto a = train<double>(init, xt, yt, xv, yv, cfg);
  const auto b = train<double>(init, xt, yt, xv, yv, cfg);
  EXPECT_TRUE(a.model == b.model);
  cfg.seed = 2;
  EXPECT_FALSE(train<double>(init, xt, yt, xv, yv, cfg).model == a.model);
}

TEST(TrainTest, SeparableClustersAreLearned) {
  M xt, xv, xs;
  std::vector<int> yt, yv, ys;
  clusters(700, 10, 7, xt, yt);
  clusters(140, 10, 8, xv, yv);
  clusters(280, 10, 9, xs, ys);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.batch_size = 50;
  const auto r = train<double>(Mlp<double>::init(tiny(10, {32, 16}, 0.05), 3), xt, yt, xv, yv, cfg);
  EXPECT_GE(accuracy_of<double>(r.model.predict_proba(xs), ys), 0.9);
}

TEST(TrainTest, Errors) {
  const auto m = Mlp<double>::init(tiny(2, {3}, 0.0), 1);
  const M x = M::Zero(4, 2);
  EXPECT_EQ(code_of([&] { train<double>(m, M(0, 2), {}, x, {0, 0, 0, 0}, TrainConfig{}); }),
            ErrorCode::EmptySplit);
  EXPECT_EQ(code_of([&] { train<double>(m, x, {0}, x, {0, 0, 0, 0}, TrainConfig{}); }),
            ErrorCode::DimensionMismatch);
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_EQ(code_of([&] { train<double>(m, x, {0, 1, 2, 3}, x, {0, 1, 2, 3}, bad); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { m.predict_indices(x); }), ErrorCode::ModelNotTrained);
}

TEST(SerializeTest, RoundTrip) {
  auto m = Mlp<double>::init(tiny(4, {5, 3}, 0.1), 8);
  M x(6, 4);
  Rng rng(1);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
  m.update_running_stats(m.forward(x, Mode::Train));
  m.attach_scaler(Scaler<double>::fit(x, ScalerMode::Normalize, {}));
  m.mark_trained();
  const auto path = std::filesystem::temp_directory_path() / "unroll_tuner_mlp_roundtrip.model";
  m.save(path);
  const auto back = Mlp<double>::load(path);
  std::filesystem::remove(path);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.predict_proba(x), m.predict_proba(x));
  EXPECT_EQ(back.predict_indices(x), m.predict_indices(x));
}

TEST(SerializeTest, RejectsDamage) {
  auto m = Mlp<double>::init(tiny(3, {4}, 0.1), 8);
  m.mark_trained();
  const std::string text = m.to_text();
  std::string truncated = text.substr(0, text.size() / 2);
  EXPECT_EQ(code_of([&] { Mlp<double>::from_text(truncated); }), ErrorCode::CorruptFile);
  std::string renamed = text;
  renamed.replace(renamed.find("layer0.gamma"), 12, "layer0.gamme");
  EXPECT_EQ(code_of([&] { Mlp<double>::from_text(renamed); }), ErrorCode::CorruptFile);
  std::string bad_value = text;
  const auto at = bad_value.find("bn_momentum");
  bad_value.replace(bad_value.find('\n', at) - 3, 3, "x!z");
  EXPECT_EQ(code_of([&] { Mlp<double>::from_text(bad_value); }), ErrorCode::CorruptFile);
  std::string other_version = text;
  other_version.replace(other_version.find(" 1"), 2, " 9");
  EXPECT_EQ(code_of([&] { Mlp<double>::from_text(other_version); }), ErrorCode::FormatVersionMismatch);
  EXPECT_EQ(code_of([&] { Mlp<float>::from_text(text); }), ErrorCode::FormatVersionMismatch);
}

TEST(FitClassifierTest, AttachesScaler) {
  std::vector<LabeledSample> rows;
  Rng rng(3);
  for (int i = 0; i < 140; ++i) {
    LabeledSample s;
    s.features.depth = 1 + i % 4;
    s.features.span[0] = 8 << (i % 7);
    s.features.data_loaded[0] = rng.uniform_int(1, 100000);
    s.label = kUnrollFactors[static_cast<std::size_t>(i % 7)];
    rows.push_back(s);
  }
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto r = fit_classifier<float>(split_dataset(rows, 1), cfg);
  ASSERT_TRUE(r.model.scaler().has_value());
  EXPECT_EQ(r.model.input_width(), r.model.scaler()->output_width());
  EXPECT_TRUE(is_unroll_factor(r.model.predict_class(rows[0].features)));
}

}  // namespace
}  // namespace unroll_tuner
