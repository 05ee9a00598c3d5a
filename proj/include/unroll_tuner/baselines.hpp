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

#ifndef UNROLL_TUNER_BASELINES_HPP_
#define UNROLL_TUNER_BASELINES_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/archive.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/featurize.hpp"

namespace unroll_tuner {

// Most frequent label; the smallest label wins ties.
int majority_label(const std::map<int, std::int64_t>& votes);

struct KnnConfig {
  int k = 5;
};

// Majority label among the k training rows closest to `query` (Euclidean).
// Equal distances favour the lower row index. Rows must come from the same
// scaler as the query. Throws Error{EmptyTrainingSet, InvalidConfig}.
template <typename Scalar, typename Query>
int knn_predict(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& train_x,
                const std::vector<int>& train_labels, const KnnConfig& cfg,
                const Eigen::MatrixBase<Query>& query) {
  const Eigen::Index n = train_x.rows();
  if (n == 0) throw Error(ErrorCode::EmptyTrainingSet, "KNN needs training rows");
  if (cfg.k < 1 || cfg.k > n) {
    throw Error(ErrorCode::InvalidConfig, "k must lie in [1, " + std::to_string(n) + "]");
  }
  if (static_cast<Eigen::Index>(train_labels.size()) != n || query.size() != train_x.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "query or labels do not match the training rows");
  }
  std::vector<std::pair<Scalar, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    Scalar d = 0;
    for (Eigen::Index c = 0; c < train_x.cols(); ++c) {
      const Scalar diff = train_x(r, c) - query(c);
      d += diff * diff;
    }
    dist[static_cast<std::size_t>(r)] = {d, r};
  }
  std::partial_sort(dist.begin(), dist.begin() + cfg.k, dist.end());
  std::map<int, std::int64_t> votes;
  for (int i = 0; i < cfg.k; ++i) ++votes[train_labels[static_cast<std::size_t>(dist[i].second)]];
  return majority_label(votes);
}

struct TreeConfig {
  int max_depth = 12;
  int min_samples_split = 2;
};

// CART classifier with Gini impurity. A sample goes left when
// x[feature] < threshold; thresholds are midpoints between consecutive
// distinct values. Candidate splits are scanned by feature index then by
// threshold and only a strictly better impurity replaces the current best.
template <typename Scalar>
class DecisionTree {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Node {
    int feature = -1;  // -1 for leaves
    Scalar threshold = 0;
    int left = -1;
    int right = -1;
    int label = 0;
    std::int64_t samples = 0;
  };

  struct Split {
    int feature = -1;
    Scalar threshold = 0;
    double impurity = 0.0;  // weighted Gini of the children
  };

  static constexpr const char* kMagic = "unroll_tuner_tree";
  static constexpr int kFormatVersion = 1;

  static DecisionTree fit(const Matrix& x, const std::vector<int>& labels, const TreeConfig& cfg) {
    if (x.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "tree needs training rows");
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
    }
    if (cfg.max_depth < 1) throw Error(ErrorCode::InvalidConfig, "max_depth must be at least 1");
    DecisionTree t;
    t.width_ = static_cast<int>(x.cols());
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    t.grow(x, labels, rows, 0, cfg);
    return t;
  }

  static double gini(const std::map<int, std::int64_t>& counts, std::int64_t n) {
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (const auto& [label, c] : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(n);
      sum += p * p;
    }
    return 1.0 - sum;
  }

  // Best split of the given rows, if any pair of distinct values exists.
  static std::optional<Split> best_split(const Matrix& x, const std::vector<int>& labels,
                                         const std::vector<Eigen::Index>& rows) {
    std::optional<Split> best;
    const auto n = static_cast<std::int64_t>(rows.size());
    std::map<int, std::int64_t> total;
    for (auto r : rows) ++total[labels[static_cast<std::size_t>(r)]];
    std::vector<Eigen::Index> sorted = rows;
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
      std::map<int, std::int64_t> left;
      std::map<int, std::int64_t> right = total;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const int label = labels[static_cast<std::size_t>(sorted[i])];
        ++left[label];
        if (--right[label] == 0) right.erase(label);
        const Scalar lo = x(sorted[i], f);
        const Scalar hi = x(sorted[i + 1], f);
        if (!(lo < hi)) continue;
        const auto nl = static_cast<std::int64_t>(i + 1);
        const std::int64_t nr = n - nl;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) +
                                 static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(n);
        if (!best || impurity < best->impurity) {
          Scalar threshold = lo + (hi - lo) / Scalar(2);
          if (!(threshold > lo)) threshold = hi;
          best = Split{static_cast<int>(f), threshold, impurity};
        }
      }
    }
    return best;
  }

  template <typename Row>
  int predict(const Eigen::MatrixBase<Row>& row) const {
    if (nodes_.empty()) throw Error(ErrorCode::ModelNotTrained, "tree has not been fitted");
    if (row.size() != width_) throw Error(ErrorCode::DimensionMismatch, "row width differs");
    int k = 0;
    while (nodes_[static_cast<std::size_t>(k)].feature >= 0) {
      const Node& node = nodes_[static_cast<std::size_t>(k)];
      k = row(node.feature) < node.threshold ? node.left : node.right;
    }
    return nodes_[static_cast<std::size_t>(k)].label;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  int width() const { return width_; }
  int depth() const { return depth_of(0); }

  void attach_scaler(Scaler<Scalar> scaler) { scaler_ = std::move(scaler); }
  const std::optional<Scaler<Scalar>>& scaler() const { return scaler_; }

  std::string to_text() const {
    ArchiveWriter w(kMagic, kFormatVersion);
    w.value("width", width_);
    write_scaler(w, scaler_);
    std::vector<int> feature, left, right, label;
    std::vector<Scalar> threshold;
    std::vector<std::int64_t> samples;
    for (const Node& n : nodes_) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      label.push_back(n.label);
      samples.push_back(n.samples);
    }
    w.values("node.feature", feature);
    w.values("node.threshold", threshold);
    w.values("node.left", left);
    w.values("node.right", right);
    w.values("node.label", label);
    w.values("node.samples", samples);
    w.end();
    return w.str();
  }

  static DecisionTree from_text(std::string text) {
    ArchiveReader r(std::move(text), kMagic, kFormatVersion);
    DecisionTree t;
    t.width_ = r.value<int>("width");
    t.scaler_ = read_scaler<Scalar>(r);
    const auto feature = r.values<int>("node.feature");
    const auto threshold = r.values<Scalar>("node.threshold");
    const auto left = r.values<int>("node.left");
    const auto right = r.values<int>("node.right");
    const auto label = r.values<int>("node.label");
    const auto samples = r.values<std::int64_t>("node.samples");
    const std::size_t n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
        label.size() != n || samples.size() != n) {
      ArchiveReader::corrupt("node arrays differ in length");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const bool leaf = feature[k] < 0;
      if (!leaf && (feature[k] >= t.width_ || left[k] <= static_cast<int>(k) ||
                    right[k] <= static_cast<int>(k) || left[k] >= static_cast<int>(n) ||
                    right[k] >= static_cast<int>(n))) {
        ArchiveReader::corrupt("node " + std::to_string(k) + " is inconsistent");
      }
      t.nodes_.push_back(Node{feature[k], threshold[k], left[k], right[k], label[k], samples[k]});
    }
    r.end();
    return t;
  }

  void save(const std::filesystem::path& path) const { write_text_file(path, to_text()); }
  static DecisionTree load(const std::filesystem::path& path) {
    return from_text(read_text_file(path));
  }

 private:
  int grow(const Matrix& x, const std::vector<int>& labels, const std::vector<Eigen::Index>& rows,
           int depth, const TreeConfig& cfg) {
    std::map<int, std::int64_t> counts;
    for (auto r : rows) ++counts[labels[static_cast<std::size_t>(r)]];
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{-1, 0, -1, -1, majority_label(counts),
                          static_cast<std::int64_t>(rows.size())});
    if (counts.size() < 2 || depth >= cfg.max_depth ||
        static_cast<int>(rows.size()) < cfg.min_samples_split) {
      return id;
    }
    const auto split = best_split(x, labels, rows);
    if (!split) return id;
    std::vector<Eigen::Index> l, r;
    for (auto row : rows) (x(row, split->feature) < split->threshold ? l : r).push_back(row);
    const int left = grow(x, labels, l, depth + 1, cfg);
    const int right = grow(x, labels, r, depth + 1, cfg);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  int depth_of(int k) const {
    if (nodes_.empty()) return 0;
    const Node& n = nodes_[static_cast<std::size_t>(k)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_of(n.left), depth_of(n.right));
  }

  std::vector<Node> nodes_;
  int width_ = 0;
  std::optional<Scaler<Scalar>> scaler_;
};

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_BASELINES_HPP_
