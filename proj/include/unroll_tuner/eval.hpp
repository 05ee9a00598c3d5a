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

#ifndef UNROLL_TUNER_EVAL_HPP_
#define UNROLL_TUNER_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unroll_tuner/backend.hpp"
#include "unroll_tuner/dataset.hpp"
#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

// pc = optimal / predit, sp = sans / predit.
struct Metrics {
  double pc = 0.0;
  double sp = 0.0;
};

// Throws Error{NonPositiveTime} unless all three times are positive and finite.
Metrics compute_metrics(double predit_ms, double optimal_ms, double sans_ms);

// Fraction of equal entries. Throws Error{EmptyTestSet, DimensionMismatch}.
double accuracy(std::span<const int> predictions, std::span<const int> truth);

// Maps raw (unscaled) features to an unrolling factor.
using Predictor = std::function<int(const FeatureVector&)>;

double accuracy(const Predictor& predictor, std::span<const LabeledSample> test);

enum class SizeClass { Small, Medium, Large };

std::string_view to_string(SizeClass size);
std::int64_t size_of(SizeClass size);  // 256, 1024, 2048

struct BenchmarkCase {
  std::string name;  // MMxM, SMM, RGB_gray, Blur, Conv_layer
  SizeClass size_class = SizeClass::Small;
  std::string schedule_name;
  Program program;
  std::vector<Transform> schedule;

  std::int64_t size() const { return size_of(size_class); }
  ScheduledProgram scheduled() const { return unroll_tuner::schedule(program, schedule); }
};

const std::vector<std::string>& benchmark_names();

// The algorithm of a benchmark at problem size `size`. Throws
// Error{InvalidConfig} for unknown names or sizes too small for the shape.
Program benchmark_program(std::string_view name, std::int64_t size);

// Schedule k (0, 1, 2) of a benchmark, without unrolling.
std::vector<Transform> benchmark_schedule(std::string_view name, int k);

// Every benchmark at every size class; schedule k goes with size class k.
std::vector<BenchmarkCase> benchmark_cases();

struct CaseResult {
  std::string name;
  std::int64_t size = 0;
  std::string schedule;
  int predicted = 0;
  int optimal = 0;
  double predit_ms = 0.0;
  double optimal_ms = 0.0;
  double sans_ms = 0.0;
  Metrics metrics;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

using EvalReport = std::vector<CaseResult>;

// Times every case at each factor of U, takes the fastest as the optimum and
// looks up the predicted factor and u=0 among those timings. Backend errors
// are recorded in CaseResult::error instead of propagating. Cases run on
// `jobs` threads unless the backend is serial.
EvalReport run_benchmarks(const Predictor& predictor, const Backend& backend,
                          std::span<const BenchmarkCase> cases, int runs, int jobs = 1);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

// Two columns: model name and held-out accuracy.
std::string accuracy_table(std::span<const std::pair<std::string, double>> rows);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_EVAL_HPP_
