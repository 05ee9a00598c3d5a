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

#include "unroll_tuner/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

Metrics compute_metrics(double predit_ms, double optimal_ms, double sans_ms) {
  for (double t : {predit_ms, optimal_ms, sans_ms}) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorCode::NonPositiveTime, "execution times must be positive, got " +
                                                  format_double(t));
    }
  }
  return Metrics{optimal_ms / predit_ms, sans_ms / predit_ms};
}

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (truth.empty()) throw Error(ErrorCode::EmptyTestSet, "accuracy needs at least one row");
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and label counts differ");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double accuracy(const Predictor& predictor, std::span<const LabeledSample> test) {
  if (test.empty()) throw Error(ErrorCode::EmptyTestSet, "accuracy needs at least one row");
  std::vector<int> pred, truth;
  for (const auto& row : test) {
    pred.push_back(predictor(row.features));
    truth.push_back(row.label);
  }
  return accuracy(pred, truth);
}

std::string_view to_string(SizeClass size) {
  switch (size) {
    case SizeClass::Small: return "small";
    case SizeClass::Medium: return "medium";
    case SizeClass::Large: return "large";
  }
  return "?";
}

std::int64_t size_of(SizeClass size) {
  switch (size) {
    case SizeClass::Small: return 256;
    case SizeClass::Medium: return 1024;
    case SizeClass::Large: return 2048;
  }
  return 0;
}

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"MMxM", "SMM", "RGB_gray", "Blur", "Conv_layer"};
  return names;
}

namespace {

constexpr DataType kBenchType = DataType::Float64;

Iterator iter(std::string name, std::int64_t extent, int level) {
  return Iterator{std::move(name), 0, extent, level};
}

Expr in(const std::string& buffer, std::vector<IndexExpr> indices) {
  return load(buffer, kBenchType, std::move(indices));
}

Expr c(double v) { return constant(v, kBenchType); }

BufferAccess out(const std::string& buffer, std::vector<IndexExpr> indices) {
  return BufferAccess{buffer, kBenchType, std::move(indices), AccessMode::Store};
}

IndexExpr sum(std::string a, std::string b) { return IndexExpr{{std::move(a), std::move(b)}, 0}; }

// Batch size per problem size. Reconstructed: channels 4, filters 16, 3x3
// kernels and a size/8 spatial extent are our choice.
std::int64_t conv_batch(std::int64_t size) {
  if (size <= 256) return 64;
  if (size <= 1024) return 32;
  return 8;
}

}  // namespace

Program benchmark_program(std::string_view name, std::int64_t size) {
  if (size < 8) throw Error(ErrorCode::InvalidConfig, "benchmark size must be at least 8");
  Program p;
  p.name = std::string(name);
  if (name == "MMxM") {
    p.iterators = {iter("i0", size, 0), iter("i1", size, 1), iter("i2", size, 2)};
    p.output = out("mul", {idx("i0"), idx("i1")});
    p.body = in("mul", {idx("i0"), idx("i1")}) +
             in("M1", {idx("i0"), idx("i2")}) * in("M2", {idx("i2"), idx("i1")});
    p.inputs = {{"M1", 2, kBenchType}, {"M2", 2, kBenchType}};
  } else if (name == "SMM") {
    p.iterators = {iter("i0", size, 0), iter("i1", size, 1)};
    p.output = out("add", {idx("i0"), idx("i1")});
    // Reconstructed: alpha = 3, beta = 2.
    p.body = c(3) * in("M1", {idx("i0"), idx("i1")}) + c(2) * in("M2", {idx("i0"), idx("i1")});
    p.inputs = {{"M1", 2, kBenchType}, {"M2", 2, kBenchType}};
  } else if (name == "RGB_gray") {
    p.iterators = {iter("x", size, 0), iter("y", size, 1)};
    p.output = out("gray", {idx("x"), idx("y")});
    p.body = c(0.299) * in("r", {idx("x"), idx("y")}) + c(0.587) * in("g", {idx("x"), idx("y")}) +
             c(0.114) * in("b", {idx("x"), idx("y")});
    p.inputs = {{"r", 2, kBenchType}, {"g", 2, kBenchType}, {"b", 2, kBenchType}};
  } else if (name == "Blur") {
    // Reconstructed: the channel loop shares the image extent.
    p.iterators = {iter("x", size, 0), iter("y", size, 1), iter("c", size, 2)};
    p.output = out("blur_x", {idx("x"), idx("y"), idx("c")});
    p.body = (in("b_input", {idx("x"), idx("y"), idx("c")}) +
              in("b_input", {idx("x", 1), idx("y"), idx("c")}) +
              in("b_input", {idx("x", 2), idx("y"), idx("c")})) /
             c(3);
    p.inputs = {{"b_input", 3, kBenchType}};
  } else if (name == "Conv_layer") {
    const std::int64_t hw = size / 8;
    p.iterators = {iter("n", conv_batch(size), 0), iter("z", 16, 1),  iter("y1", hw, 2),
                   iter("x1", hw, 3),              iter("k_z", 4, 4), iter("k_y", 3, 5),
                   iter("k_x", 3, 6)};
    p.output = out("conv", {idx("n"), idx("z"), idx("y1"), idx("x1")});
    p.body = in("conv", {idx("n"), idx("z"), idx("y1"), idx("x1")}) +
             in("filter", {idx("z"), idx("k_z"), idx("k_y"), idx("k_x")}) *
                 in("c_input", {idx("n"), idx("k_z"), sum("y1", "k_y"), sum("x1", "k_x")});
    p.inputs = {{"filter", 4, kBenchType}, {"c_input", 4, kBenchType}};
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown benchmark '" + std::string(name) + "'");
  }
  const auto report = validate_program(p);
  if (!report.ok()) throw Error(ErrorCode::InvalidProgram, report.summary());
  return p;
}

std::vector<Transform> benchmark_schedule(std::string_view name, int k) {
  if (k < 0 || k > 2) throw Error(ErrorCode::InvalidConfig, "schedule index must be 0, 1 or 2");
  const Parallelize outer{0};
  if (name == "MMxM") {
    if (k == 1) return {outer};
    const std::int64_t f = k == 0 ? 16 : 32;
    return {Tile2{0, 1, f, f}, outer};
  }
  if (name == "SMM") {
    if (k == 0) return {};
    const std::int64_t f = k == 1 ? 16 : 32;
    return {Tile2{0, 1, f, f}, Interchange{1, 2}, outer};
  }
  // Reconstructed: tile sizes for RGB_gray; Blur and Conv_layer only
  // parallelize the outer loop.
  if (name == "RGB_gray") {
    if (k == 0) return {outer};
    const std::int64_t f = k == 1 ? 32 : 64;
    return {Tile2{0, 1, f, f}, outer};
  }
  if (name == "Blur" || name == "Conv_layer") return {outer};
  throw Error(ErrorCode::InvalidConfig, "unknown benchmark '" + std::string(name) + "'");
}

std::vector<BenchmarkCase> benchmark_cases() {
  const SizeClass sizes[] = {SizeClass::Small, SizeClass::Medium, SizeClass::Large};
  std::vector<BenchmarkCase> cases;
  for (const auto& name : benchmark_names()) {
    for (int k = 0; k < 3; ++k) {
      BenchmarkCase bc;
      bc.name = name;
      bc.size_class = sizes[k];
      bc.schedule_name = "schedule" + std::to_string(k);
      bc.program = benchmark_program(name, size_of(sizes[k]));
      bc.schedule = benchmark_schedule(name, k);
      cases.push_back(std::move(bc));
    }
  }
  return cases;
}

namespace {

CaseResult run_case(const Predictor& predictor, const Backend& backend, const BenchmarkCase& bc,
                    int runs) {
  CaseResult r;
  r.name = bc.name;
  r.size = bc.size();
  r.schedule = bc.schedule_name;
  try {
    const LabeledSample sample = label_sample(bc.scheduled(), backend, runs);
    r.optimal = sample.label;
    r.predicted = predictor(sample.features);
    const auto it = sample.timing.find(r.predicted);
    if (it == sample.timing.end()) {
      throw Error(ErrorCode::LabelNotInClassSet,
                  "predicted factor " + std::to_string(r.predicted) + " was not timed");
    }
    r.predit_ms = it->second;
    r.optimal_ms = sample.timing.at(r.optimal);
    r.sans_ms = sample.timing.at(0);
    r.metrics = compute_metrics(r.predit_ms, r.optimal_ms, r.sans_ms);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

EvalReport run_benchmarks(const Predictor& predictor, const Backend& backend,
                          std::span<const BenchmarkCase> cases, int runs, int jobs) {
  EvalReport report(cases.size());
  const int workers = backend.serial() ? 1 : std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      report[i] = run_case(predictor, backend, cases[i], runs);
    }
    return report;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) {
        report[i] = run_case(predictor, backend, cases[i], runs);
      }
    });
  }
  for (auto& t : pool) t.join();
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "case,size,schedule,predicted,optimal,predit_ms,optimal_ms,sans_ms,pc,sp\n";
  for (const auto& r : report) {
    out << r.name << "," << r.size << "," << r.schedule << ",";
    if (r.ok()) {
      out << r.predicted << "," << r.optimal << "," << format_double(r.predit_ms) << ","
          << format_double(r.optimal_ms) << "," << format_double(r.sans_ms) << ","
          << fixed(r.metrics.pc, 3) << "," << fixed(r.metrics.sp, 3);
    } else {
      out << ",,,,,,";
    }
    out << "\n";
  }
  return out.str();
}

std::string report_table(const EvalReport& report) {
  const std::vector<std::string> header = {"case",       "size",    "schedule", "predicted",
                                           "optimal",    "predit_ms", "optimal_ms", "sans_ms",
                                           "pc",         "sp"};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> errors;
  for (const auto& r : report) {
    std::vector<std::string> row = {r.name, std::to_string(r.size), r.schedule};
    if (r.ok()) {
      row.insert(row.end(), {std::to_string(r.predicted), std::to_string(r.optimal),
                             fixed(r.predit_ms, 6), fixed(r.optimal_ms, 6), fixed(r.sans_ms, 6),
                             fixed(r.metrics.pc, 3), fixed(r.metrics.sp, 3)});
    } else {
      row.insert(row.end(), 7, "-");
      errors.push_back(r.name + " " + std::to_string(r.size) + ": " + r.error);
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      // Text columns left-aligned, numbers right-aligned.
      if (c < 3) {
        out << row[c] << std::string(width[c] - row[c].size(), ' ');
      } else {
        out << std::string(width[c] - row[c].size(), ' ') << row[c];
      }
    }
    out << "\n";
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  int hits = 0;
  int gains = 0;
  int ok = 0;
  for (const auto& r : report) {
    if (!r.ok()) continue;
    ++ok;
    // Clamped factors can tie the optimum without being equal to it.
    hits += r.optimal_ms == r.predit_ms ? 1 : 0;
    gains += r.metrics.sp > 1.0 ? 1 : 0;
  }
  out << "\noptimal predictions (pc = 1): " << hits << "/" << report.size()
      << ", speedups above 1: " << gains << "/" << report.size();
  if (ok < static_cast<int>(report.size())) out << ", failed: " << report.size() - ok;
  out << "\n";
  for (const auto& e : errors) out << "error: " << e << "\n";
  return out.str();
}

std::string accuracy_table(std::span<const std::pair<std::string, double>> rows) {
  std::size_t w = 5;
  for (const auto& [name, acc] : rows) w = std::max(w, name.size());
  std::ostringstream out;
  out << "model" << std::string(w - 5, ' ') << "  accuracy\n";
  for (const auto& [name, acc] : rows) {
    out << name << std::string(w - name.size(), ' ') << "  " << fixed(acc, 4) << "\n";
  }
  return out.str();
}

}  // namespace unroll_tuner
