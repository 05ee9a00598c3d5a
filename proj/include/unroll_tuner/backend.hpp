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

#ifndef UNROLL_TUNER_BACKEND_HPP_
#define UNROLL_TUNER_BACKEND_HPP_

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

struct ExecResult {
  double mean_ms = 0.0;
  int runs = 0;
  std::vector<double> per_run_ms;
};

// Builds a result from individual timings. Throws Error{NonPositiveTime} when
// the list is empty or holds a non-positive entry.
ExecResult make_exec_result(std::vector<double> per_run_ms);

// Synthetic cost in nanoseconds:
//
//   T*ops*c_body + (T/u')*c_loop + T*c_icache*max(0, u'*ops - icache_capacity)
//
// with T the total trip count, ops = body_op_count and u' = max(u, 1),
// divided by parallel_divisor when a loop is parallelized.
struct CostModelParams {
  double c_body = 1.0;
  double c_loop = 16.0;
  double c_icache = 1.0;
  double icache_capacity = 80.0;
  double parallel_divisor = 4.0;
};

// Loads plus arithmetic operations of the body expression (the store is not
// counted).
std::int64_t body_op_count(const Program& p);

// Throws Error{InvalidConfig} unless every parameter is strictly positive.
void check_params(const CostModelParams& params);

// Raw cost in nanoseconds for factor `u`; `u` is clamped against the
// innermost extent exactly as apply_unroll does.
double cost_model_ns(const ScheduledProgram& sp, std::int64_t u, const CostModelParams& params);

// Throws Error{InvalidFactor} when `u` is not in the class set.
ExecResult cost_model_evaluate(const ScheduledProgram& sp, std::int64_t u,
                               const CostModelParams& params = {});

// Self-contained C translation unit for the scheduled nest. Running the
// binary as `./kernel [runs]` performs one warm-up and `runs` timed calls,
// then prints `mean_ms=<value>`. Compiled with -DUNROLL_TUNER_CHECKSUM it
// also prints `checksum=<hex>` for the output after a single call on fresh
// buffers. Throws Error{DepthExceedsMax}.
std::string emit_kernel_source(const ScheduledProgram& sp);

struct ToolchainConfig {
  std::string cmd = "cc";
  std::string flags =
      "-O2 -fno-unroll-loops -fno-peel-loops -fno-tree-vectorize -ffp-contract=off -fopenmp";
  std::chrono::seconds timeout{60};
  bool checksum = false;  // compile with -DUNROLL_TUNER_CHECKSUM

  // Default config with `cmd` taken from UNROLL_TUNER_TOOLCHAIN when set.
  static ToolchainConfig from_environment();
};

struct NativeRun {
  ExecResult timing;
  std::string output;  // stdout of the last execution
};

// Compiles and runs `source` `runs` times (each execution performs its own
// warm-up and one timed call). Compilation is retried once. Executions are
// serialized process-wide. Throws Error{ToolchainMissing, CompileError,
// RunTimeout, RunFailed}.
NativeRun native_run(std::string_view source, int runs, const ToolchainConfig& toolchain = {});
ExecResult native_measure(std::string_view source, int runs,
                          const ToolchainConfig& toolchain = {});

// Parses the checksum line printed by a kernel built with checksum = true.
std::uint64_t parse_checksum(std::string_view kernel_output);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string_view name() const = 0;
  // Execution time of `sp` (no unroll applied) unrolled by `u`.
  virtual ExecResult evaluate(const ScheduledProgram& sp, std::int64_t u, int runs) const = 0;
  // Timed executions must not overlap.
  virtual bool serial() const = 0;
};

class CostModelBackend final : public Backend {
 public:
  explicit CostModelBackend(CostModelParams params = {});
  std::string_view name() const override { return "cost"; }
  ExecResult evaluate(const ScheduledProgram& sp, std::int64_t u, int runs) const override;
  bool serial() const override { return false; }
  const CostModelParams& params() const { return params_; }

 private:
  CostModelParams params_;
};

class NativeBackend final : public Backend {
 public:
  explicit NativeBackend(ToolchainConfig toolchain = ToolchainConfig::from_environment());
  std::string_view name() const override { return "native"; }
  ExecResult evaluate(const ScheduledProgram& sp, std::int64_t u, int runs) const override;
  bool serial() const override { return true; }
  const ToolchainConfig& toolchain() const { return toolchain_; }

 private:
  ToolchainConfig toolchain_;
};

// "cost" or "native"; throws Error{InvalidConfig} otherwise.
std::unique_ptr<Backend> make_backend(std::string_view name, const CostModelParams& params = {},
                                      const ToolchainConfig& toolchain =
                                          ToolchainConfig::from_environment());

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_BACKEND_HPP_
