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

#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "unroll_tuner/error.hpp"
#include "unroll_tuner/generator.hpp"
#include "unroll_tuner/interpreter.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {
namespace {

Program vec(std::int64_t n) {
  return parse_program("program v\niter i 0 " + std::to_string(n) +
                       "\ninput a 1 int32\noutput o[i] int32\nbody a[i] * 2 + 1\n");
}

Program grid(std::int64_t n, std::int64_t m) {
  return parse_program("program g\niter i 0 " + std::to_string(n) + "\niter j 0 " +
                       std::to_string(m) +
                       "\ninput a 2 int64\noutput o[i, j] int64\nbody a[i, j] - a[j, i]\n");
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

TEST(ScheduleTest, SplitReindexes) {
  const auto sp = apply_transform(ScheduledProgram(vec(100)), Split{0, 4});
  ASSERT_EQ(sp.depth(), 2);
  EXPECT_EQ(sp.current_iterators()[0].extent(), 25);
  EXPECT_EQ(sp.current_iterators()[1].extent(), 4);
  EXPECT_EQ(sp.current_iterators()[0].name, "i_o");
  EXPECT_EQ(sp.current_iterators()[1].name, "i_i");
  EXPECT_EQ(sp.index_map()(0, 0), 4);
  EXPECT_EQ(sp.index_map()(0, 1), 1);
  EXPECT_EQ(sp.index_offset()(0), 0);
  EXPECT_FALSE(sp.needs_any_guard());
}

TEST(ScheduleTest, NonDivisibleSplitIsGuarded) {
  const auto sp = apply_transform(ScheduledProgram(vec(10)), Split{0, 4});
  EXPECT_EQ(sp.current_iterators()[0].extent(), 3);
  EXPECT_TRUE(sp.needs_guard(0));
  EXPECT_EQ(interpret(sp).body_evaluations, 10);
  EXPECT_EQ(interpret(sp).output().checksum(), interpret(vec(10)).output().checksum());
}

TEST(ScheduleTest, SplitThenMergeRestores) {
  const Program p = grid(12, 8);
  const auto sp = apply_transform(ScheduledProgram(p), Split{1, 2});
  const auto back = merge_split(sp, 1);
  EXPECT_EQ(back.current_iterators(), ScheduledProgram(p).current_iterators());
  EXPECT_EQ(back.index_map(), ScheduledProgram(p).index_map());
}

TEST(ScheduleTest, InterchangeTwiceIsIdentity) {
  const ScheduledProgram base(grid(4, 6));
  const auto once = apply_transform(base, Interchange{0, 1});
  EXPECT_EQ(once.current_iterators()[0].name, "j");
  const auto twice = apply_transform(once, Interchange{0, 1});
  EXPECT_EQ(twice.current_iterators(), base.current_iterators());
  EXPECT_EQ(twice.index_map(), base.index_map());
}

TEST(ScheduleTest, Tile2VisitsSamePoints) {
  const Program p = grid(8, 8);
  const auto sp = schedule(p, std::vector<Transform>{Tile2{0, 1, 4, 4}});
  ASSERT_EQ(sp.depth(), 4);
  std::vector<std::int64_t> extents;
  for (const auto& it : sp.current_iterators()) extents.push_back(it.extent());
  EXPECT_EQ(extents, (std::vector<std::int64_t>{2, 2, 4, 4}));
  InterpretOptions opts;
  opts.record_stores = true;
  auto tiled = interpret(sp, opts).store_trace;
  auto plain = interpret(p, opts).store_trace;
  EXPECT_NE(tiled, plain);  // block order differs
  std::sort(tiled.begin(), tiled.end());
  std::sort(plain.begin(), plain.end());
  EXPECT_EQ(tiled, plain);
  EXPECT_EQ(tiled.size(), 64u);
}

TEST(ScheduleTest, UnrollArithmetic) {
  const ScheduledProgram base(vec(100));
  const auto u2 = apply_unroll(base, 2);
  EXPECT_EQ(u2.main_trips(), 50);
  EXPECT_EQ(u2.remainder_extent(), 0);
  const auto u0 = apply_unroll(base, 0);
  EXPECT_EQ(u0.current_iterators(), base.current_iterators());
  EXPECT_EQ(u0.unroll(), 0);
  const auto u8 = apply_unroll(base, 8);
  EXPECT_EQ(u8.main_trips(), 12);
  EXPECT_EQ(u8.remainder_extent(), 4);
  InterpretOptions opts;
  opts.record_stores = true;
  EXPECT_EQ(interpret(u8, opts).store_trace, interpret(base, opts).store_trace);
}

TEST(ScheduleTest, UnrollClampsToExtent) {
  EXPECT_EQ(clamp_unroll_factor(64, 100), 64);
  EXPECT_EQ(clamp_unroll_factor(64, 40), 32);
  EXPECT_EQ(clamp_unroll_factor(16, 3), 2);
  EXPECT_EQ(clamp_unroll_factor(2, 1), 1);
  set_warnings_enabled(false);
  const auto sp = apply_unroll(ScheduledProgram(vec(5)), 64);
  set_warnings_enabled(true);
  EXPECT_EQ(sp.effective_unroll(), 4);
  EXPECT_EQ(sp.main_trips() * 4 + sp.remainder_extent(), 5);
}

TEST(ScheduleTest, TransformErrors) {
  const ScheduledProgram base(grid(16, 16));
  EXPECT_EQ(code_of([&] { apply_transform(base, Split{5, 4}); }), ErrorCode::UnknownLevel);
  EXPECT_EQ(code_of([&] { apply_transform(base, Split{0, 3}); }), ErrorCode::FactorNotPowerOfTwo);
  EXPECT_EQ(code_of([&] { apply_transform(base, Split{0, 256}); }), ErrorCode::FactorOutOfRange);
  EXPECT_EQ(code_of([&] { apply_unroll(base, 3); }), ErrorCode::InvalidFactor);
  EXPECT_EQ(code_of([&] { apply_transform(apply_unroll(base, 2), Unroll{4}); }),
            ErrorCode::DuplicateTransform);
}

TEST(ScheduleTest, ValidateScheduleExamples) {
  const Program p = grid(64, 64);
  EXPECT_TRUE(validate_schedule(p, std::vector<Transform>{Tile2{0, 1, 32, 32}, Parallelize{0},
                                                          Unroll{16}})
                  .ok());
  EXPECT_TRUE(validate_schedule(p, std::vector<Transform>{Unroll{3}})
                  .has(ViolationCode::FactorNotPowerOfTwo));
  EXPECT_TRUE(validate_schedule(p, std::vector<Transform>{Unroll{2}, Unroll{4}})
                  .has(ViolationCode::DuplicateUnroll));
  EXPECT_TRUE(validate_schedule(p, std::vector<Transform>{Parallelize{0}, Parallelize{1}})
                  .has(ViolationCode::DuplicateParallelize));
  EXPECT_TRUE(validate_schedule(p, std::vector<Transform>{Split{3, 2}}).has(ViolationCode::UnknownLevel));
}

TEST(ScheduleTest, TransformTextRoundTrip) {
  const std::vector<Transform> ts = {Split{1, 8},          Interchange{0, 2},
                                     Tile2{0, 1, 4, 16},   Tile3{0, 1, 2, 2, 4, 8},
                                     Parallelize{0},       Unroll{32}};
  for (const auto& t : ts) EXPECT_EQ(to_text(parse_transform(to_text(t))), to_text(t));
  EXPECT_THROW(parse_transform("skew 0 1"), Error);
}

TEST(ScheduleTest, ProgramFileRoundTrip) {
  const auto sp = schedule(grid(32, 16), std::vector<Transform>{Tile2{0, 1, 8, 4}, Parallelize{0}});
  const ProgramFile f = parse_program_file(to_text(sp));
  const auto again = schedule(f.program, f.schedule);
  EXPECT_EQ(to_text(again), to_text(sp));
  EXPECT_EQ(again.index_map(), sp.index_map());
}

TEST(SchedulePropertyTest, UnrollCoversEveryExtent) {
  for (std::int64_t n = 1; n <= 300; ++n) {
    for (std::int64_t u : {2, 4, 8, 16, 32, 64}) {
      if (u > n) continue;  // clamped factors are covered above
      const auto sp = apply_unroll(ScheduledProgram(vec(n)), u);
      ASSERT_EQ(sp.main_trips() * u + sp.remainder_extent(), n) << "n=" << n << " u=" << u;
      ASSERT_LT(sp.remainder_extent(), u);
    }
  }
}

TEST(SchedulePropertyTest, Deterministic) {
  GenConfig cfg;
  cfg.seed = 21;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Program p = gen_program(cfg, i);
    const auto a = gen_schedules(cfg, p);
    const auto b = gen_schedules(cfg, p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      const auto x = schedule(p, a[k].applied());
      EXPECT_EQ(to_text(x), to_text(b[k]));
      EXPECT_EQ(x.index_map(), b[k].index_map());
      EXPECT_EQ(x.index_offset(), b[k].index_offset());
    }
  }
}

// Scheduled nests, unrolled or not, compute the same output as the base nest.
TEST(SchedulePropertyTest, SemanticsPreserved) {
  GenConfig cfg;
  cfg.seed = 22;
  cfg.extent_choices = {2, 4, 8};
  cfg.max_leaves = 12;
  int checked = 0;
  for (std::uint64_t i = 0; i < 60; ++i) {
    const Program p = gen_program(cfg, i);
    const Buffer want = interpret(p).output();
    for (const auto& sp : gen_schedules(cfg, p)) {
      for (int u : {0, 4, 64}) {
        set_warnings_enabled(false);
        const auto unrolled = apply_unroll(sp, u);
        set_warnings_enabled(true);
        const Buffer got = interpret(unrolled).output();
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < want.size(); ++k) {
          if (is_integral(p.dtype())) {
            ASSERT_EQ(got.at(k), want.at(k));
          } else {
            ASSERT_NEAR(got.at(k), want.at(k), 1e-12);
          }
        }
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 1000);
}

}  // namespace
}  // namespace unroll_tuner
