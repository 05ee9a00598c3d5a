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

#ifndef UNROLL_TUNER_MLP_HPP_
#define UNROLL_TUNER_MLP_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/archive.hpp"
#include "unroll_tuner/dataset.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/generator.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

enum class Mode { Train, Infer };

struct Architecture {
  int input_width = 1;
  std::vector<int> hidden = {500, 400, 250, 100};
  int classes = static_cast<int>(kUnrollFactors.size());
  std::vector<double> dropout = {0.12, 0.10, 0.04, 0.07};
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  static Architecture standard(int input_width) {
    Architecture a;
    a.input_width = input_width;
    return a;
  }
  std::vector<int> layer_dims() const {
    std::vector<int> dims{input_width};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(classes);
    return dims;
  }
  // Throws Error{DimensionMismatch} for inconsistent fields.
  void check() const {
    const auto fail = [](const std::string& m) { throw Error(ErrorCode::DimensionMismatch, m); };
    if (input_width < 1 || classes < 1) fail("layer widths must be positive");
    if (dropout.size() != hidden.size()) fail("one dropout rate per hidden layer is required");
    for (int h : hidden) {
      if (h < 1) fail("layer widths must be positive");
    }
    for (double p : dropout) {
      if (!(p >= 0.0 && p < 1.0)) fail("dropout rates must lie in [0, 1)");
    }
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0) || !(bn_epsilon > 0.0)) {
      fail("batchnorm momentum must lie in [0, 1) and epsilon be positive");
    }
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int patience = 10;
  int max_epochs = 500;
  std::uint64_t seed = 1;

  void check() const {
    if (!(learning_rate > 0) || batch_size < 1 || !(beta1 > 0) || !(beta2 > 0) ||
        !(adam_epsilon > 0) || patience < 1 || max_epochs < 1) {
      throw Error(ErrorCode::InvalidConfig, "training parameters must be positive");
    }
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
};

// Tracks the best validation loss; asks to stop after `patience` epochs in a
// row without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  bool update(double valid_loss, int epoch) {
    improved_ = best_epoch_ < 0 || valid_loss < best_loss_;
    if (improved_) {
      best_loss_ = valid_loss;
      best_epoch_ = epoch;
      wait_ = 0;
    } else {
      ++wait_;
    }
    return wait_ >= patience_;
  }
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int wait_ = 0;
  int best_epoch_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Row-wise softmax with the row maximum subtracted first.
template <typename Scalar>
MatrixX<Scalar> softmax(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

template <typename Scalar>
MatrixX<Scalar> one_hot(const std::vector<int>& labels, int classes) {
  MatrixX<Scalar> y = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= classes) {
      throw Error(ErrorCode::DimensionMismatch, "class index " + std::to_string(labels[r]));
    }
    y(static_cast<Eigen::Index>(r), labels[r]) = Scalar(1);
  }
  return y;
}

// Mean cross-entropy with log(p) clamped at p >= 1e-12.
template <typename Scalar>
Scalar cross_entropy(const MatrixX<Scalar>& probs, const MatrixX<Scalar>& one_hot_labels) {
  if (probs.rows() != one_hot_labels.rows() || probs.cols() != one_hot_labels.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "labels do not match predictions");
  }
  if (probs.rows() == 0) return Scalar(0);
  const MatrixX<Scalar> logp = probs.array().max(Scalar(1e-12)).log();
  return -(one_hot_labels.array() * logp.array()).sum() / static_cast<Scalar>(probs.rows());
}

// Index of the row maximum; the lowest index wins ties.
template <typename Derived>
int argmax_row(const Eigen::MatrixBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = k;
  }
  return static_cast<int>(best);
}

// Fully connected classifier: each hidden layer is dense -> batchnorm ->
// ReLU -> inverted dropout, the output layer is dense -> softmax. Rows of the
// input matrix are samples.
//
// Model file fields, in order: magic/version, scalar, classes, layer_dims,
// dropout, bn_momentum, bn_epsilon, trained, scaler.* (present, mode,
// input_width, divisor, rescaled, dropped, center, scale), then per hidden
// layer l: layer<l>.w, .b, .gamma, .beta, .running_mean, .running_var, and
// finally out.w, out.b. Matrices are row-major with their shape first.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Masks = std::vector<Matrix>;

  struct Cache {
    std::vector<Matrix> inputs;   // input of every dense layer
    std::vector<Matrix> xhat;     // normalized pre-activations
    std::vector<Matrix> inv_std;  // 1 x width
    std::vector<Matrix> bn_out;   // gamma * xhat + beta
    std::vector<Matrix> batch_mean;
    std::vector<Matrix> batch_var;
    Masks masks;  // scaled keep-masks actually applied (Train mode)
    Matrix logits;
    Matrix probs;
  };

  static constexpr int kFormatVersion = 1;
  static constexpr const char* kMagic = "unroll_tuner_mlp";

  Mlp() = default;

  // Uniform weights in [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out)),
  // zero biases, gamma 1, beta 0, running mean 0 and variance 1.
  static Mlp init(const Architecture& arch, std::uint64_t seed) {
    arch.check();
    Mlp m;
    m.arch_ = arch;
    Rng rng(seed);
    const auto dims = arch.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
      Matrix w(dims[l], dims[l + 1]);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          w(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
        }
      }
      m.w_.push_back(std::move(w));
      m.b_.push_back(Matrix::Zero(1, dims[l + 1]));
      if (l + 2 < dims.size()) {
        m.gamma_.push_back(Matrix::Ones(1, dims[l + 1]));
        m.beta_.push_back(Matrix::Zero(1, dims[l + 1]));
        m.running_mean_.push_back(Matrix::Zero(1, dims[l + 1]));
        m.running_var_.push_back(Matrix::Ones(1, dims[l + 1]));
      }
    }
    return m;
  }
  static Mlp init(int input_width, std::uint64_t seed) {
    return init(Architecture::standard(input_width), seed);
  }

  const Architecture& architecture() const { return arch_; }
  int input_width() const { return arch_.input_width; }
  int hidden_layers() const { return static_cast<int>(arch_.hidden.size()); }
  int classes() const { return arch_.classes; }

  const Matrix& weight(int l) const { return w_[l]; }
  const Matrix& bias(int l) const { return b_[l]; }
  const Matrix& gamma(int l) const { return gamma_[l]; }
  const Matrix& beta(int l) const { return beta_[l]; }
  const Matrix& running_mean(int l) const { return running_mean_[l]; }
  const Matrix& running_var(int l) const { return running_var_[l]; }

  // Trainable parameters: per hidden layer W, b, gamma, beta; then W, b of
  // the output layer. Gradients use the same order.
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (int l = 0; l < hidden_layers(); ++l) {
      out.insert(out.end(), {&w_[l], &b_[l], &gamma_[l], &beta_[l]});
    }
    out.insert(out.end(), {&w_.back(), &b_.back()});
    return out;
  }
  std::vector<const Matrix*> parameters() const {
    std::vector<const Matrix*> out;
    for (auto* p : const_cast<Mlp*>(this)->parameters()) out.push_back(p);
    return out;
  }

  // Draws inverted-dropout masks for a batch of `rows` samples.
  Masks draw_masks(Eigen::Index rows, Rng& rng) const {
    Masks masks;
    for (int l = 0; l < hidden_layers(); ++l) {
      const double p = arch_.dropout[l];
      Matrix mask(rows, arch_.hidden[l]);
      const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - p));
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        for (Eigen::Index r = 0; r < mask.rows(); ++r) {
          mask(r, c) = (p == 0.0 || rng.uniform01() >= p) ? keep : Scalar(0);
        }
      }
      masks.push_back(std::move(mask));
    }
    return masks;
  }

  // Train mode normalizes with batch statistics and applies `masks` when
  // given; Infer mode uses the running statistics and no dropout.
  Cache forward(const Matrix& x, Mode mode, const Masks* masks = nullptr) const {
    if (x.cols() != input_width()) {
      throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.cols()) +
                                                    " columns, model expects " +
                                                    std::to_string(input_width()));
    }
    if (masks != nullptr && static_cast<int>(masks->size()) != hidden_layers()) {
      throw Error(ErrorCode::DimensionMismatch, "one dropout mask per hidden layer is required");
    }
    const Scalar eps = static_cast<Scalar>(arch_.bn_epsilon);
    Cache c;
    Matrix a = x;
    for (int l = 0; l < hidden_layers(); ++l) {
      c.inputs.push_back(a);
      Matrix z = a * w_[l];
      z.rowwise() += b_[l].row(0);
      Matrix mean;
      Matrix var;
      if (mode == Mode::Train) {
        mean = z.colwise().mean();
        var = (z.rowwise() - mean.row(0)).array().square().colwise().mean();
      } else {
        mean = running_mean_[l];
        var = running_var_[l];
      }
      Matrix inv = (var.array() + eps).rsqrt();
      Matrix xhat = (z.rowwise() - mean.row(0)).array().rowwise() * inv.row(0).array();
      Matrix y = (xhat.array().rowwise() * gamma_[l].row(0).array()).rowwise() +
                 beta_[l].row(0).array();
      a = y.cwiseMax(Scalar(0));
      if (mode == Mode::Train && masks != nullptr) {
        const Matrix& mask = (*masks)[l];
        if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
          throw Error(ErrorCode::DimensionMismatch, "dropout mask shape");
        }
        a = a.cwiseProduct(mask);
        c.masks.push_back(mask);
      }
      c.xhat.push_back(std::move(xhat));
      c.inv_std.push_back(std::move(inv));
      c.bn_out.push_back(std::move(y));
      c.batch_mean.push_back(std::move(mean));
      c.batch_var.push_back(std::move(var));
    }
    c.inputs.push_back(a);
    c.logits = a * w_.back();
    c.logits.rowwise() += b_.back().row(0);
    c.probs = softmax<Scalar>(c.logits);
    return c;
  }

  Matrix predict_proba(const Matrix& x) const { return forward(x, Mode::Infer).probs; }

  // Train-mode loss and gradients (parameters() order).
  std::pair<Scalar, std::vector<Matrix>> loss_and_gradients(const Matrix& x,
                                                            const Matrix& one_hot_labels,
                                                            const Masks* masks = nullptr,
                                                            Cache* cache_out = nullptr) const {
    Cache c = forward(x, Mode::Train, masks);
    const Scalar loss = cross_entropy<Scalar>(c.probs, one_hot_labels);
    const Scalar n = static_cast<Scalar>(x.rows());
    std::vector<Matrix> grads(static_cast<std::size_t>(4 * hidden_layers() + 2));

    Matrix g = (c.probs - one_hot_labels) / n;
    grads[grads.size() - 2] = c.inputs.back().transpose() * g;
    grads[grads.size() - 1] = g.colwise().sum();
    Matrix da = g * w_.back().transpose();
    for (int l = hidden_layers() - 1; l >= 0; --l) {
      if (!c.masks.empty()) da = da.cwiseProduct(c.masks[l]);
      const Matrix dy = da.array() * (c.bn_out[l].array() > Scalar(0)).template cast<Scalar>();
      const Matrix& xhat = c.xhat[l];
      grads[4 * l + 2] = (dy.array() * xhat.array()).colwise().sum();
      grads[4 * l + 3] = dy.colwise().sum();
      const Matrix dxhat = dy.array().rowwise() * gamma_[l].row(0).array();
      const Matrix sum_dxhat = dxhat.colwise().sum();
      const Matrix sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum();
      Matrix dz = (dxhat * n).rowwise() - sum_dxhat.row(0);
      dz -= (xhat.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
      dz = (dz.array().rowwise() * c.inv_std[l].row(0).array()) / n;
      grads[4 * l] = c.inputs[l].transpose() * dz;
      grads[4 * l + 1] = dz.colwise().sum();
      if (l > 0) da = dz * w_[l].transpose();
    }
    if (cache_out != nullptr) *cache_out = std::move(c);
    return {loss, std::move(grads)};
  }

  std::pair<Scalar, std::vector<Matrix>> loss_and_gradients(const Matrix& x,
                                                            const std::vector<int>& labels,
                                                            const Masks* masks = nullptr,
                                                            Cache* cache_out = nullptr) const {
    return loss_and_gradients(x, one_hot<Scalar>(labels, classes()), masks, cache_out);
  }

  // running = momentum * running + (1 - momentum) * batch statistic.
  void update_running_stats(const Cache& c) {
    const Scalar mom = static_cast<Scalar>(arch_.bn_momentum);
    for (int l = 0; l < hidden_layers(); ++l) {
      running_mean_[l] = running_mean_[l] * mom + c.batch_mean[l] * (Scalar(1) - mom);
      running_var_[l] = running_var_[l] * mom + c.batch_var[l] * (Scalar(1) - mom);
    }
  }

  void attach_scaler(Scaler<Scalar> scaler) {
    if (scaler.output_width() != input_width()) {
      throw Error(ErrorCode::DimensionMismatch, "scaler yields " +
                                                    std::to_string(scaler.output_width()) +
                                                    " columns, model expects " +
                                                    std::to_string(input_width()));
    }
    scaler_ = std::move(scaler);
  }
  const std::optional<Scaler<Scalar>>& scaler() const { return scaler_; }

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  // Class index of every (already scaled) row.
  std::vector<int> predict_indices(const Matrix& x) const {
    require_trained();
    const Matrix p = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = argmax_row(p.row(r));
    return out;
  }

  // Unrolling factor for raw features; the attached scaler is applied first.
  int predict_class(const FeatureVector& fv) const {
    require_trained();
    Matrix row = scaler_ ? Matrix(scaler_->transform(fv)) : Matrix(fv.as_row<Scalar>());
    return kUnrollFactors[static_cast<std::size_t>(predict_indices(row)[0])];
  }

  std::string to_text() const {
    ArchiveWriter w(kMagic, kFormatVersion);
    w.text("scalar", scalar_name());
    w.values("classes", std::vector<int>(kUnrollFactors.begin(), kUnrollFactors.end()));
    w.values("layer_dims", arch_.layer_dims());
    w.values("dropout", arch_.dropout);
    w.value("bn_momentum", arch_.bn_momentum);
    w.value("bn_epsilon", arch_.bn_epsilon);
    w.value("trained", trained_ ? 1 : 0);
    write_scaler(w, scaler_);
    for (int l = 0; l < hidden_layers(); ++l) {
      const std::string key = "layer" + std::to_string(l);
      w.matrix(key + ".w", w_[l]);
      w.matrix(key + ".b", b_[l]);
      w.matrix(key + ".gamma", gamma_[l]);
      w.matrix(key + ".beta", beta_[l]);
      w.matrix(key + ".running_mean", running_mean_[l]);
      w.matrix(key + ".running_var", running_var_[l]);
    }
    w.matrix("out.w", w_.back());
    w.matrix("out.b", b_.back());
    w.end();
    return w.str();
  }

  // Throws Error{FormatVersionMismatch} or Error{CorruptFile}.
  static Mlp from_text(std::string text) {
    ArchiveReader r(std::move(text), kMagic, kFormatVersion);
    if (r.text("scalar") != scalar_name()) {
      throw Error(ErrorCode::FormatVersionMismatch, "model scalar type differs");
    }
    const auto classes = r.values<int>("classes");
    if (!std::equal(classes.begin(), classes.end(), kUnrollFactors.begin(), kUnrollFactors.end())) {
      ArchiveReader::corrupt("class list differs from the unrolling factors");
    }
    const auto dims = r.values<int>("layer_dims");
    if (dims.size() < 2) ArchiveReader::corrupt("layer_dims too short");
    Architecture arch;
    arch.input_width = dims.front();
    arch.classes = dims.back();
    arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
    arch.dropout = r.values<double>("dropout");
    arch.bn_momentum = r.value<double>("bn_momentum");
    arch.bn_epsilon = r.value<double>("bn_epsilon");
    if (arch.classes != static_cast<int>(classes.size())) {
      ArchiveReader::corrupt("output width differs from the class count");
    }
    try {
      arch.check();
    } catch (const Error& e) {
      ArchiveReader::corrupt(e.what());
    }
    Mlp m;
    m.arch_ = arch;
    m.trained_ = r.value<int>("trained") != 0;
    m.scaler_ = read_scaler<Scalar>(r);
    if (m.scaler_ && m.scaler_->output_width() != arch.input_width) {
      ArchiveReader::corrupt("scaler width differs from the input layer");
    }
    const auto all = arch.layer_dims();
    for (int l = 0; l < static_cast<int>(arch.hidden.size()); ++l) {
      const std::string key = "layer" + std::to_string(l);
      m.w_.push_back(r.matrix<Scalar>(key + ".w", all[l], all[l + 1]));
      m.b_.push_back(r.matrix<Scalar>(key + ".b", 1, all[l + 1]));
      m.gamma_.push_back(r.matrix<Scalar>(key + ".gamma", 1, all[l + 1]));
      m.beta_.push_back(r.matrix<Scalar>(key + ".beta", 1, all[l + 1]));
      m.running_mean_.push_back(r.matrix<Scalar>(key + ".running_mean", 1, all[l + 1]));
      Matrix var = r.matrix<Scalar>(key + ".running_var", 1, all[l + 1]);
      if ((var.array() < Scalar(0)).any()) ArchiveReader::corrupt("negative running variance");
      m.running_var_.push_back(std::move(var));
    }
    const int last = static_cast<int>(all.size()) - 2;
    m.w_.push_back(r.matrix<Scalar>("out.w", all[last], all[last + 1]));
    m.b_.push_back(r.matrix<Scalar>("out.b", 1, all[last + 1]));
    r.end();
    return m;
  }

  void save(const std::filesystem::path& path) const { write_text_file(path, to_text()); }
  static Mlp load(const std::filesystem::path& path) { return from_text(read_text_file(path)); }

  friend bool operator==(const Mlp& a, const Mlp& b) { return a.to_text() == b.to_text(); }

 private:
  static std::string scalar_name() {
    if constexpr (std::is_same_v<Scalar, float>) return "float32";
    if constexpr (std::is_same_v<Scalar, double>) return "float64";
    return "other";
  }

  void require_trained() const {
    if (!trained_) throw Error(ErrorCode::ModelNotTrained, "model has not been trained");
  }

  Architecture arch_;
  std::vector<Matrix> w_;
  std::vector<Matrix> b_;
  std::vector<Matrix> gamma_;
  std::vector<Matrix> beta_;
  std::vector<Matrix> running_mean_;
  std::vector<Matrix> running_var_;
  std::optional<Scaler<Scalar>> scaler_;
  bool trained_ = false;
};

// Adam with bias-corrected moments kept per parameter.
template <typename Scalar>
class Adam {
 public:
  using Matrix = MatrixX<Scalar>;

  explicit Adam(const TrainConfig& cfg)
      : lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_epsilon) {}

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size()) {
      throw Error(ErrorCode::DimensionMismatch, "one gradient per parameter is required");
    }
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const Scalar b1 = static_cast<Scalar>(beta1_);
    const Scalar b2 = static_cast<Scalar>(beta2_);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const Scalar lr = static_cast<Scalar>(lr_);
    const Scalar eps = static_cast<Scalar>(eps_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1 * m_[k] + (Scalar(1) - b1) * grads[k];
      v_[k] = b2 * v_[k] + (Scalar(1) - b2) * grads[k].cwiseProduct(grads[k]);
      params[k]->array() -=
          lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps);
    }
  }
  int steps() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  int t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

template <typename Scalar>
struct TrainResult {
  Mlp<Scalar> model;  // snapshot with the lowest validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

template <typename Scalar>
double accuracy_of(const MatrixX<Scalar>& probs, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (argmax_row(probs.row(r)) == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// Mini-batch training with seeded shuffling and dropout, early stopping on
// the validation loss. Inputs must already be scaled. Throws
// Error{EmptySplit}.
template <typename Scalar>
TrainResult<Scalar> train(Mlp<Scalar> model, const MatrixX<Scalar>& x_train,
                          const std::vector<int>& y_train, const MatrixX<Scalar>& x_valid,
                          const std::vector<int>& y_valid, const TrainConfig& cfg) {
  using Matrix = MatrixX<Scalar>;
  cfg.check();
  if (x_train.rows() == 0 || x_valid.rows() == 0) {
    throw Error(ErrorCode::EmptySplit, "training and validation sets must be non-empty");
  }
  if (static_cast<Eigen::Index>(y_train.size()) != x_train.rows() ||
      static_cast<Eigen::Index>(y_valid.size()) != x_valid.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
  }
  const Matrix y_valid_hot = one_hot<Scalar>(y_valid, model.classes());
  Rng rng(cfg.seed);
  Adam<Scalar> adam(cfg);
  EarlyStopping stopper(cfg.patience);
  TrainResult<Scalar> result;
  result.model = model;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto rows = static_cast<Eigen::Index>(end - start);
      Matrix xb(rows, x_train.cols());
      std::vector<int> yb(end - start);
      for (std::size_t k = start; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - start)) = x_train.row(order[k]);
        yb[k - start] = y_train[static_cast<std::size_t>(order[k])];
      }
      const auto masks = model.draw_masks(rows, rng);
      typename Mlp<Scalar>::Cache cache;
      auto [loss, grads] = model.loss_and_gradients(xb, yb, &masks, &cache);
      model.update_running_stats(cache);
      adam.step(model.parameters(), grads);
      loss_sum += static_cast<double>(loss) * static_cast<double>(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (argmax_row(cache.probs.row(r)) == yb[static_cast<std::size_t>(r)]) ++correct;
      }
    }
    const Matrix valid_probs = model.predict_proba(x_valid);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.valid_loss = static_cast<double>(cross_entropy<Scalar>(valid_probs, y_valid_hot));
    rec.valid_accuracy = accuracy_of<Scalar>(valid_probs, y_valid);
    result.history.push_back(rec);
    const bool stop = stopper.update(rec.valid_loss, epoch);
    if (stopper.improved()) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stop) break;
  }
  result.model.mark_trained();
  return result;
}

// Fits the scaler on the training rows, trains a model of the standard
// architecture on the scaled split and attaches the scaler to the result.
template <typename Scalar>
TrainResult<Scalar> fit_classifier(const SplitDataset& split, const TrainConfig& cfg,
                                   ScalerMode mode = ScalerMode::Standardize) {
  if (split.train.empty() || split.valid.empty()) {
    throw Error(ErrorCode::EmptySplit, "training and validation sets must be non-empty");
  }
  auto scaler = Scaler<Scalar>::fit(feature_matrix<Scalar>(split.train), mode);
  auto model = Mlp<Scalar>::init(scaler.output_width(), cfg.seed);
  auto result = train<Scalar>(std::move(model), scaler.transform(feature_matrix<Scalar>(split.train)),
                              class_indices(split.train),
                              scaler.transform(feature_matrix<Scalar>(split.valid)),
                              class_indices(split.valid), cfg);
  result.model.attach_scaler(std::move(scaler));
  return result;
}

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_MLP_HPP_
