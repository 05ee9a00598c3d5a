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

#ifndef UNROLL_TUNER_GENERATOR_HPP_
#define UNROLL_TUNER_GENERATOR_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unroll_tuner/ir.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

// xoshiro256** seeded through SplitMix64. The sequence depends only on the
// seed, so corpora are identical across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  // Independent stream for item `index` of a run seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next();
  // Uniform in [lo, hi] (inclusive), unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p) { return uniform01() < p; }
  template <typename T>
  const T& pick(std::span<const T> items) {
    return items[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

enum class TransformKind { Tile2, Tile3, Interchange, Parallelize };
std::string_view to_string(TransformKind kind);

struct GenConfig {
  std::uint64_t seed = 1;
  int depth_min = 1;
  int depth_max = 4;
  std::vector<std::int64_t> extent_choices = {8, 16, 32, 64, 128, 256, 512};
  int max_inputs = 4;
  std::vector<DataType> dtype_choices = {DataType::Int32, DataType::Int64, DataType::Float32,
                                         DataType::Float64};
  int schedules_per_program = 10;
  std::vector<TransformKind> allowed_transforms = {TransformKind::Tile2, TransformKind::Tile3,
                                                   TransformKind::Interchange,
                                                   TransformKind::Parallelize};
  int max_leaves = 40;
  double access_probability = 0.75;  // chance that a leaf is a load
};

// Throws Error{InvalidConfig} describing the first broken constraint.
void check_config(const GenConfig& cfg);

Program gen_program(const GenConfig& cfg, std::uint64_t index);

// schedules_per_program legal schedules; the first one is always empty.
std::vector<ScheduledProgram> gen_schedules(const GenConfig& cfg, const Program& p);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_GENERATOR_HPP_
