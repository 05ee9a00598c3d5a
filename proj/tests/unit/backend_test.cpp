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

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "unroll_tuner/backend.hpp"
#include "unroll_tuner/dataset.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/eval.hpp"
#include "unroll_tuner/generator.hpp"
#include "unroll_tuner/interpreter.hpp"

namespace unroll_tuner {
namespace {

std::size_t occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::string nest_of(const std::string& source) {
  const auto b = source.find("/* nest begin */");
  const auto e = source.find("/* nest end */");
  return source.substr(b, e - b);
}

// Body with `leaves` loads summed together: ops = 2 * leaves - 1.
Program chain(int leaves, std::int64_t extent) {
  std::string body = "a[i]";
  for (int k = 1; k < leaves; ++k) body += " + a[i]";
  return parse_program("program ch\niter i 0 " + std::to_string(extent) +
                       "\ninput a 1 float64\noutput o[i] float64\nbody " + body + "\n");
}

bool have_toolchain() { return std::system("command -v cc > /dev/null 2>&1") == 0; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

TEST(ExecResultTest, MeanOfRuns) {
  const auto r = make_exec_result({1.0, 2.0, 6.0});
  EXPECT_EQ(r.runs, 3);
  EXPECT_DOUBLE_EQ(r.mean_ms, 3.0);
  EXPECT_EQ(code_of([] { make_exec_result({}); }), ErrorCode::NonPositiveTime);
  EXPECT_EQ(code_of([] { make_exec_result({1.0, 0.0}); }), ErrorCode::NonPositiveTime);
}

TEST(CostModelTest, Formula) {
  const ScheduledProgram sp(chain(5, 1000));  // ops 9
  CostModelParams params;
  params.c_body = 2;
  params.c_loop = 10;
  params.c_icache = 3;
  params.icache_capacity = 40;
  for (int u : kUnrollFactors) {
    const double uu = std::max(u, 1);
    const double want = 1000 * 9 * 2 + 1000 / uu * 10 + 1000 * 3 * std::max(0.0, uu * 9 - 40);
    EXPECT_DOUBLE_EQ(cost_model_ns(sp, u, params), want) << u;
    EXPECT_DOUBLE_EQ(cost_model_evaluate(sp, u, params).mean_ms, want * 1e-6);
    EXPECT_EQ(cost_model_evaluate(sp, u, params).runs, 1);
  }
}

TEST(CostModelTest, NoUnrollCostsMoreThanTwo) {
  const ScheduledProgram sp(chain(3, 64));
  EXPECT_GT(cost_model_ns(sp, 0, {}), cost_model_ns(sp, 2, {}));
}

TEST(CostModelTest, IcachePenaltyBoundsOptimum) {
  const ScheduledProgram sp(chain(5, 4096));
  ASSERT_EQ(body_op_count(sp.base()), 9);
  CostModelParams params;
  params.icache_capacity = 320;
  // A ten-op body needs one extra leaf: chain(5) has 9 ops, so add a constant.
  Program p = sp.base();
  p.body = p.body + constant(1, DataType::Float64);
  const ScheduledProgram ten(p);
  ASSERT_EQ(body_op_count(p), 10);
  EXPECT_GT(cost_model_ns(ten, 64, params) - cost_model_ns(ten, 16, params), 0.0);
  std::map<int, double> t;
  for (int u : kUnrollFactors) t[u] = cost_model_evaluate(ten, u, params).mean_ms;
  EXPECT_LT(argmin_label(t), 64);
}

TEST(CostModelTest, DifferentOpsDifferentOptima) {
  const CostModelParams params;
  const auto best = [&](const Program& p) {
    std::map<int, double> t;
    for (int u : kUnrollFactors) t[u] = cost_model_evaluate(ScheduledProgram(p), u, params).mean_ms;
    return argmin_label(t);
  };
  EXPECT_NE(best(chain(2, 4096)), best(chain(20, 4096)));
}

TEST(CostModelTest, Parallel) {
  const Program p = chain(3, 512);
  const auto par = schedule(p, std::vector<Transform>{Parallelize{0}});
  EXPECT_DOUBLE_EQ(cost_model_ns(par, 8, {}), cost_model_ns(ScheduledProgram(p), 8, {}) / 4.0);
}

TEST(CostModelTest, Errors) {
  const ScheduledProgram sp(chain(3, 64));
  EXPECT_EQ(code_of([&] { cost_model_evaluate(sp, 3); }), ErrorCode::InvalidFactor);
  CostModelParams bad;
  bad.c_loop = 0;
  EXPECT_EQ(code_of([&] { cost_model_evaluate(sp, 2, bad); }), ErrorCode::InvalidConfig);
}

TEST(CostModelTest, Pure) {
  const auto sp = schedule(benchmark_program("MMxM", 64), benchmark_schedule("MMxM", 0));
  const double first = cost_model_evaluate(sp, 16).mean_ms;
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(cost_model_evaluate(sp, 16).mean_ms, first);
}

TEST(EmitTest, ReplicatesBody) {
  const auto sp = apply_unroll(ScheduledProgram(benchmark_program("MMxM", 10)), 4);
  const std::string nest = nest_of(emit_kernel_source(sp));
  // Four copies in the main loop and one in the epilogue.
  EXPECT_EQ(occurrences(nest, "b_mul[10 * i_i0 + i_i1] = "), 5u);
  EXPECT_EQ(occurrences(nest, "c_i2 += 4"), 1u);
  EXPECT_EQ(occurrences(nest, "for ("), 4u);
}

TEST(EmitTest, ParallelPragma) {
  const auto sp = schedule(benchmark_program("SMM", 16), std::vector<Transform>{Parallelize{0}});
  const std::string nest = nest_of(emit_kernel_source(sp));
  const auto pragma = nest.find("#pragma omp parallel for");
  ASSERT_NE(pragma, std::string::npos);
  EXPECT_LT(pragma, nest.find("for (int64_t c_i0"));
  EXPECT_EQ(occurrences(nest, "#pragma"), 1u);
}

TEST(EmitTest, NoUnrollKeepsLoopCount) {
  const auto sp = schedule(benchmark_program("MMxM", 32), benchmark_schedule("MMxM", 0));
  const std::string nest = nest_of(emit_kernel_source(sp));
  EXPECT_EQ(occurrences(nest, "for ("), static_cast<std::size_t>(sp.depth()));
  EXPECT_EQ(occurrences(nest, "b_mul["), 2u);
}

TEST(EmitTest, HarnessContract) {
  const std::string src = emit_kernel_source(ScheduledProgram(chain(2, 8)));
  EXPECT_NE(src.find("mean_ms=%.17g"), std::string::npos);
  EXPECT_NE(src.find("checksum=%016llx"), std::string::npos);
}

TEST(NativeTest, MissingToolchain) {
  ToolchainConfig tc;
  tc.cmd = "definitely-not-a-compiler-xyz";
  EXPECT_EQ(code_of([&] { native_measure("int main(void){return 0;}", 1, tc); }),
            ErrorCode::ToolchainMissing);
}

TEST(NativeTest, CompileErrorCarriesDiagnostics) {
  if (!have_toolchain()) GTEST_SKIP() << "no C compiler";
  try {
    native_measure("int main(void) { return }", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CompileError);
    EXPECT_NE(e.detail().find("error"), std::string::npos);
  }
}

TEST(NativeTest, Timeout) {
  if (!have_toolchain()) GTEST_SKIP() << "no C compiler";
  ToolchainConfig tc;
  tc.timeout = std::chrono::seconds(1);
  EXPECT_EQ(code_of([&] { native_measure("int main(void) { for (;;) {} }", 1, tc); }),
            ErrorCode::RunTimeout);
}

TEST(NativeTest, MeasuresKernel) {
  if (!have_toolchain()) GTEST_SKIP() << "no C compiler";
  const auto sp = schedule(benchmark_program("MMxM", 32), benchmark_schedule("MMxM", 0));
  const std::string src = emit_kernel_source(apply_unroll(sp, 8));
  const auto one = native_measure(src, 1);
  ASSERT_EQ(one.per_run_ms.size(), 1u);
  EXPECT_EQ(one.per_run_ms[0], one.mean_ms);
  const auto many = native_measure(src, 5);
  EXPECT_EQ(many.runs, 5);
  EXPECT_GT(many.mean_ms, 0.0);
}

TEST(NativeTest, BackendLabels) {
  if (!have_toolchain()) GTEST_SKIP() << "no C compiler";
  const NativeBackend backend;
  const auto sample = label_sample(ScheduledProgram(benchmark_program("SMM", 64)), backend, 2);
  EXPECT_EQ(sample.timing.size(), kUnrollFactors.size());
  EXPECT_TRUE(is_unroll_factor(sample.label));
}

// Compiled kernels store exactly what the interpreter computes.
TEST(NativePropertyTest, ChecksumMatchesInterpreter) {
  if (!have_toolchain()) GTEST_SKIP() << "no C compiler";
  ToolchainConfig tc;
  tc.checksum = true;
  GenConfig cfg;
  cfg.seed = 51;
  cfg.extent_choices = {2, 4, 8};
  cfg.depth_max = 3;
  cfg.max_leaves = 12;
  for (std::uint64_t i = 0; i < 8; ++i) {
    const Program p = gen_program(cfg, i);
    const auto schedules = gen_schedules(cfg, p);
    const std::uint64_t want = interpret(p).output().checksum();
    for (std::size_t k : {std::size_t{0}, schedules.size() - 1}) {
      for (int u : {0, 4}) {
        set_warnings_enabled(false);
        const auto sp = apply_unroll(schedules[k], u);
        set_warnings_enabled(true);
        const auto run = native_run(emit_kernel_source(sp), 1, tc);
        EXPECT_EQ(parse_checksum(run.output), want) << to_text(sp);
      }
    }
  }
}

}  // namespace
}  // namespace unroll_tuner
