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

#ifndef UNROLL_TUNER_SCHEDULE_HPP_
#define UNROLL_TUNER_SCHEDULE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/ir.hpp"

namespace unroll_tuner {

// Deepest loop nest accepted after tiling.
inline constexpr int kMaxDepth = 7;

// Admissible unrolling factors; 0 means "not unrolled".
inline constexpr std::array<int, 7> kUnrollFactors = {0, 2, 4, 8, 16, 32, 64};

inline constexpr std::int64_t kMinSplitFactor = 2;
inline constexpr std::int64_t kMaxSplitFactor = 128;

inline constexpr bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }
bool is_unroll_factor(std::int64_t u);
// Position of `u` in kUnrollFactors, or -1.
int unroll_class_index(std::int64_t u);

// Factor actually applied to an innermost loop of `extent` iterations:
// factors above the extent fall back to the largest power of two <= extent.
std::int64_t clamp_unroll_factor(std::int64_t u, std::int64_t extent);

struct Split {
  int level = 0;
  std::int64_t factor = 2;
  std::string outer_name;  // defaults to <name>_o when empty
  std::string inner_name;  // defaults to <name>_i when empty
};
struct Interchange {
  int level_a = 0;
  int level_b = 1;
};
struct Tile2 {
  int level_a = 0;
  int level_b = 1;
  std::int64_t factor_a = 2;
  std::int64_t factor_b = 2;
};
struct Tile3 {
  int level_a = 0;
  int level_b = 1;
  int level_c = 2;
  std::int64_t factor_a = 2;
  std::int64_t factor_b = 2;
  std::int64_t factor_c = 2;
};
struct Unroll {
  std::int64_t factor = 0;
};
struct Parallelize {
  int level = 0;
};

using Transform = std::variant<Split, Interchange, Tile2, Tile3, Unroll, Parallelize>;

enum class LoopRole { Original, SplitOuter, SplitInner, TileOuter, TileInner };

struct LoopOrigin {
  LoopRole role = LoopRole::Original;
  std::int64_t factor = 0;  // strip-mine factor for split/tile loops
  bool parallel = false;
};

using IndexMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IndexVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// A program together with the transforms applied to it. Each original
// iterator value is an affine function of the current loop values:
//
//   original = index_map() * current + index_offset()
//
// Strip-mining with a factor that does not divide the extent rounds the outer
// loop up; the excess points are masked by a guard on the original bound.
class ScheduledProgram {
 public:
  explicit ScheduledProgram(Program base);

  const Program& base() const { return base_; }
  const std::vector<Transform>& applied() const { return applied_; }
  const std::vector<Iterator>& current_iterators() const { return loops_; }
  const std::vector<LoopOrigin>& loop_origins() const { return origins_; }
  const IndexMatrix& index_map() const { return index_map_; }
  const IndexVector& index_offset() const { return index_offset_; }
  int depth() const { return static_cast<int>(loops_.size()); }

  // Requested factor (0 when absent) and the factor actually used on the
  // innermost loop after clamping to its extent.
  std::int64_t unroll() const { return unroll_; }
  std::int64_t effective_unroll() const;
  std::int64_t main_trips() const;
  std::int64_t remainder_extent() const;

  std::optional<int> parallel_level() const;
  bool interchange_applied() const;

  // True when strip-mining overshoots the original bound of base iterator k.
  bool needs_guard(int base_level) const;
  bool needs_any_guard() const;

  // Product of current extents (padded points included).
  std::int64_t trip_count() const;

 private:
  friend ScheduledProgram apply_transform(const ScheduledProgram&, const Transform&);
  friend ScheduledProgram apply_unroll(const ScheduledProgram&, std::int64_t);
  friend ScheduledProgram merge_split(const ScheduledProgram&, int);
  friend class ScheduleBuilder;

  Program base_;
  std::vector<Transform> applied_;
  std::vector<Iterator> loops_;
  std::vector<LoopOrigin> origins_;
  IndexMatrix index_map_;
  IndexVector index_offset_;
  std::int64_t unroll_ = 0;
};

// Throws Error{UnknownLevel, FactorNotPowerOfTwo, FactorOutOfRange,
// NonAdjacentLevels, DuplicateTransform}; Unroll delegates to apply_unroll.
ScheduledProgram apply_transform(const ScheduledProgram& sp, const Transform& t);

// Unrolls the innermost loop. Factors above the innermost extent are clamped
// to the largest power of two not exceeding it. Throws Error{InvalidFactor}.
ScheduledProgram apply_unroll(const ScheduledProgram& sp, std::int64_t u);

// Undoes a Split: `level` must be the outer loop of the most recent transform,
// which must be a Split.
ScheduledProgram merge_split(const ScheduledProgram& sp, int level);

ScheduledProgram schedule(const Program& p, std::span<const Transform> transforms);

// The same schedule with any Unroll removed.
ScheduledProgram without_unroll(const ScheduledProgram& sp);

ValidationReport validate_schedule(const Program& p, std::span<const Transform> transforms);
ValidationReport validate_schedule(const ScheduledProgram& sp);

// Schedule command lines:
//   split <l> <f> | interchange <la> <lb> | tile2 <la> <lb> <fa> <fb>
//   tile3 <la> <lb> <lc> <fa> <fb> <fc> | parallelize <l> | unroll <f>
std::string to_text(const Transform& t);
bool is_schedule_directive(std::string_view word);
Transform parse_transform(std::string_view line);

// A program file: the program text followed by schedule command lines.
struct ProgramFile {
  Program program;
  std::vector<Transform> schedule;
};

ProgramFile parse_program_file(std::string_view text);
std::string to_text(const ProgramFile& file);
std::string to_text(const ScheduledProgram& sp);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_SCHEDULE_HPP_
