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

#ifndef UNROLL_TUNER_DATASET_HPP_
#define UNROLL_TUNER_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/backend.hpp"
#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

// One corpus row. `timing` maps each explored factor to its mean time in
// milliseconds; it is empty for rows read from a CSV without a sidecar.
struct LabeledSample {
  FeatureVector features;
  int label = 0;
  std::map<int, double> timing;
  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

std::vector<int> default_classes();

// Factor with the smallest time; ties go to the smallest factor.
int argmin_label(const std::map<int, double>& timing);

// Times every factor of `classes` on the schedule without its unroll and
// labels the sample. Backend errors are rethrown with the factor attached.
LabeledSample label_sample(const ScheduledProgram& sp, const Backend& backend, int runs,
                           std::span<const int> classes = {});

// Labels every schedule, in order. Up to `jobs` threads are used unless the
// backend requires serial execution.
std::vector<LabeledSample> label_all(std::span<const ScheduledProgram> schedules,
                                     const Backend& backend, int runs, int jobs,
                                     std::span<const int> classes = {});

// Down-samples every class with at least `min_per_class` rows to the size of
// the smallest such class; classes below the minimum are dropped with a
// warning. Surviving rows keep their relative order. Throws
// Error{AllClassesBelowMinimum}.
std::vector<LabeledSample> balance_classes(std::span<const LabeledSample> rows,
                                           std::int64_t min_per_class, std::uint64_t seed);

std::map<int, std::int64_t> class_counts(std::span<const LabeledSample> rows);

struct SplitDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> valid;
  std::vector<LabeledSample> test;
  std::uint64_t seed = 0;
};

inline constexpr double kTrainFraction = 0.6;
inline constexpr double kValidFraction = 0.2;

// Seeded shuffle then a 60/20/20 cut. Throws Error{TooFewRows} below 10 rows.
SplitDataset split_dataset(std::span<const LabeledSample> rows, std::uint64_t seed);

// Feature rows as a matrix and labels as class indices (positions in
// kUnrollFactors).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> feature_matrix(
    std::span<const LabeledSample> rows) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(
      static_cast<Eigen::Index>(rows.size()), FeatureVector::kWidth);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = rows[r].features.template as_row<Scalar>();
  }
  return x;
}
std::vector<int> class_indices(std::span<const LabeledSample> rows);

// CSV with the featurize header. When every row carries timings a sidecar
// `<path>.timings.csv` is written as well.
void save_csv(std::span<const LabeledSample> rows, const std::filesystem::path& path);
// Throws Error{HeaderMismatch} or Error{MalformedRow} (with the line number).
std::vector<LabeledSample> load_csv(const std::filesystem::path& path);

std::filesystem::path timings_path(const std::filesystem::path& csv);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_DATASET_HPP_
