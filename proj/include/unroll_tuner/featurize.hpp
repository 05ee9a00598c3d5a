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

#ifndef UNROLL_TUNER_FEATURIZE_HPP_
#define UNROLL_TUNER_FEATURIZE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/archive.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

// Static description of a scheduled computation. All entries are
// non-negative integers; per-level arrays are zero-padded past `depth`.
// The unrolling factor is deliberately absent: it is the label.
struct FeatureVector {
  using Levels = std::array<std::int64_t, kMaxDepth>;

  std::int64_t depth = 0;
  Levels span{};
  Levels data_loaded{};
  std::int64_t load_count = 0;
  std::int64_t store_count = 0;
  std::int64_t leaf_count = 0;
  std::array<std::int64_t, 4> op_counts{};  // Add, Sub, Mul, Div
  std::int64_t dtype_flag = 0;
  Levels tile_applied{};
  Levels tile_factor{};
  std::int64_t interchange_applied = 0;
  Levels parallel_level_flag{};

  static constexpr int kWidth = 1 + kMaxDepth + kMaxDepth + 3 + 4 + 1 + kMaxDepth + kMaxDepth +
                                1 + kMaxDepth;

  // Values in CSV column order.
  std::array<std::int64_t, kWidth> values() const;
  static FeatureVector from_values(std::span<const std::int64_t> values);

  template <typename Scalar>
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> as_row() const {
    const auto v = values();
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row(kWidth);
    for (int k = 0; k < kWidth; ++k) row(k) = static_cast<Scalar>(v[k]);
    return row;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Column names in CSV order (without the trailing "label").
const std::vector<std::string>& feature_names();
std::string csv_header();

// Columns holding data_loaded values; they dwarf the others and are divided
// by 1000 before scaling.
std::vector<int> data_loaded_columns();

FeatureVector extract_features(const ScheduledProgram& sp);

// For each loop level L: the sum over load accesses of the product of the
// extents of the loops at level >= L that the access depends on. An access
// depending on none of them is loop-invariant there and contributes 0.
FeatureVector::Levels data_loaded_per_level(const ScheduledProgram& sp);

std::string encode_csv_row(const FeatureVector& fv, int label);
// Throws Error{MalformedRow} or Error{LabelNotInClassSet}.
std::pair<FeatureVector, int> decode_csv_row(std::string_view line);

enum class ScalerMode { Standardize, Normalize };

std::string_view to_string(ScalerMode mode);

// Column-wise preprocessing fitted on training rows: selected columns are
// divided by a constant, constant columns are dropped, the rest are
// standardized ((x - mean) / std) or normalized ((x - min) / (max - min)).
template <typename Scalar>
class Scaler {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Scaler() = default;

  static Scaler fit(const Matrix& train, ScalerMode mode,
                    std::vector<int> rescaled_columns = data_loaded_columns(),
                    Scalar divisor = Scalar(1000)) {
    if (train.rows() == 0) throw Error(ErrorCode::EmptyTrainingSet, "cannot fit a scaler on 0 rows");
    Scaler s;
    s.mode_ = mode;
    s.input_width_ = static_cast<int>(train.cols());
    s.divisor_ = divisor;
    std::erase_if(rescaled_columns, [&](int c) { return c < 0 || c >= s.input_width_; });
    s.rescaled_ = std::move(rescaled_columns);

    const Matrix pre = s.rescale(train);
    for (int c = 0; c < s.input_width_; ++c) {
      const auto col = pre.col(c);
      const Scalar lo = col.minCoeff();
      const Scalar hi = col.maxCoeff();
      if (lo == hi) {
        s.dropped_.push_back(c);
        continue;
      }
      s.kept_.push_back(c);
      if (mode == ScalerMode::Standardize) {
        const Scalar mean = col.mean();
        const Scalar var = (col.array() - mean).square().mean();
        s.center_.push_back(mean);
        s.scale_.push_back(std::sqrt(var));
      } else {
        s.center_.push_back(lo);
        s.scale_.push_back(hi - lo);
      }
    }
    return s;
  }

  // Restores a scaler from its stored fields (used by model loading).
  static Scaler from_parts(ScalerMode mode, int input_width, Scalar divisor,
                           std::vector<int> rescaled, std::vector<int> dropped,
                           std::vector<Scalar> center, std::vector<Scalar> scale) {
    Scaler s;
    s.mode_ = mode;
    s.input_width_ = input_width;
    s.divisor_ = divisor;
    s.rescaled_ = std::move(rescaled);
    s.dropped_ = std::move(dropped);
    for (int c = 0; c < input_width; ++c) {
      if (std::find(s.dropped_.begin(), s.dropped_.end(), c) == s.dropped_.end()) {
        s.kept_.push_back(c);
      }
    }
    if (center.size() != s.kept_.size() || scale.size() != s.kept_.size()) {
      throw Error(ErrorCode::CorruptFile, "scaler statistics do not match retained columns");
    }
    s.center_ = std::move(center);
    s.scale_ = std::move(scale);
    return s;
  }

  Matrix transform(const Matrix& rows) const {
    if (rows.cols() != input_width_) {
      throw Error(ErrorCode::DimensionMismatch, "scaler expects " + std::to_string(input_width_) +
                                                    " columns, got " + std::to_string(rows.cols()));
    }
    const Matrix pre = rescale(rows);
    Matrix out(rows.rows(), output_width());
    for (std::size_t k = 0; k < kept_.size(); ++k) {
      out.col(static_cast<Eigen::Index>(k)) =
          (pre.col(kept_[k]).array() - center_[k]) / scale_[k];
    }
    return out;
  }

  RowVector transform(const FeatureVector& fv) const {
    Matrix row = fv.as_row<Scalar>();
    return transform(row).row(0);
  }

  bool fitted() const { return input_width_ > 0; }
  ScalerMode mode() const { return mode_; }
  int input_width() const { return input_width_; }
  int output_width() const { return static_cast<int>(kept_.size()); }
  Scalar divisor() const { return divisor_; }
  const std::vector<int>& rescaled_columns() const { return rescaled_; }
  const std::vector<int>& dropped_columns() const { return dropped_; }
  const std::vector<int>& kept_columns() const { return kept_; }
  const std::vector<Scalar>& center() const { return center_; }
  const std::vector<Scalar>& scale() const { return scale_; }

 private:
  Matrix rescale(const Matrix& rows) const {
    Matrix pre = rows;
    for (int c : rescaled_) pre.col(c) /= divisor_;
    return pre;
  }

  ScalerMode mode_ = ScalerMode::Standardize;
  int input_width_ = 0;
  Scalar divisor_ = Scalar(1000);
  std::vector<int> rescaled_;
  std::vector<int> dropped_;
  std::vector<int> kept_;
  std::vector<Scalar> center_;
  std::vector<Scalar> scale_;
};

// Scaler fields of a model file: scaler.present, then mode, input_width,
// divisor, rescaled, dropped, center and scale when present.
template <typename Scalar>
void write_scaler(ArchiveWriter& w, const std::optional<Scaler<Scalar>>& scaler) {
  w.value("scaler.present", scaler ? 1 : 0);
  if (!scaler) return;
  w.text("scaler.mode", to_string(scaler->mode()));
  w.value("scaler.input_width", scaler->input_width());
  w.value("scaler.divisor", scaler->divisor());
  w.values("scaler.rescaled", scaler->rescaled_columns());
  w.values("scaler.dropped", scaler->dropped_columns());
  w.values("scaler.center", scaler->center());
  w.values("scaler.scale", scaler->scale());
}

template <typename Scalar>
std::optional<Scaler<Scalar>> read_scaler(ArchiveReader& r) {
  if (r.value<int>("scaler.present") == 0) return std::nullopt;
  const std::string mode_text = r.text("scaler.mode");
  ScalerMode mode = ScalerMode::Standardize;
  if (mode_text == to_string(ScalerMode::Normalize)) {
    mode = ScalerMode::Normalize;
  } else if (mode_text != to_string(ScalerMode::Standardize)) {
    ArchiveReader::corrupt("unknown scaler mode " + mode_text);
  }
  const int width = r.value<int>("scaler.input_width");
  const Scalar divisor = r.value<Scalar>("scaler.divisor");
  auto rescaled = r.values<int>("scaler.rescaled");
  auto dropped = r.values<int>("scaler.dropped");
  auto center = r.values<Scalar>("scaler.center");
  auto scale = r.values<Scalar>("scaler.scale");
  for (int c : rescaled) {
    if (c < 0 || c >= width) ArchiveReader::corrupt("scaler column out of range");
  }
  for (int c : dropped) {
    if (c < 0 || c >= width) ArchiveReader::corrupt("scaler column out of range");
  }
  return Scaler<Scalar>::from_parts(mode, width, divisor, std::move(rescaled), std::move(dropped),
                                    std::move(center), std::move(scale));
}

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_FEATURIZE_HPP_
