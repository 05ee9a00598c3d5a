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

#include "unroll_tuner/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "text_util.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/generator.hpp"

namespace unroll_tuner {

std::vector<int> default_classes() {
  return std::vector<int>(kUnrollFactors.begin(), kUnrollFactors.end());
}

int argmin_label(const std::map<int, double>& timing) {
  if (timing.empty()) throw Error(ErrorCode::InvalidConfig, "no timings to label");
  int best = timing.begin()->first;
  double best_time = timing.begin()->second;
  for (const auto& [u, t] : timing) {  // ascending factors: strict < keeps the smallest
    if (t < best_time) {
      best = u;
      best_time = t;
    }
  }
  return best;
}

namespace {

std::string strip_code_prefix(const Error& e) {
  std::string_view what = e.what();
  const auto colon = what.find(": ");
  return std::string(colon == std::string_view::npos ? what : what.substr(colon + 2));
}

}  // namespace

LabeledSample label_sample(const ScheduledProgram& sp, const Backend& backend, int runs,
                           std::span<const int> classes) {
  const std::vector<int> all = default_classes();
  if (classes.empty()) classes = all;
  const ScheduledProgram base = without_unroll(sp);
  LabeledSample sample;
  sample.features = extract_features(base);
  for (int u : classes) {
    if (!is_unroll_factor(u)) {
      throw Error(ErrorCode::LabelNotInClassSet, "factor " + std::to_string(u) + " not in class set");
    }
    try {
      sample.timing[u] = backend.evaluate(base, u, runs).mean_ms;
    } catch (const Error& e) {
      throw Error(e.code(), "unroll factor " + std::to_string(u) + ": " + strip_code_prefix(e),
                  e.detail());
    }
  }
  sample.label = argmin_label(sample.timing);
  return sample;
}

std::vector<LabeledSample> label_all(std::span<const ScheduledProgram> schedules,
                                     const Backend& backend, int runs, int jobs,
                                     std::span<const int> classes) {
  std::vector<LabeledSample> out(schedules.size());
  const int workers = backend.serial() ? 1 : std::max(1, jobs);
  if (workers == 1 || schedules.size() < 2) {
    for (std::size_t i = 0; i < schedules.size(); ++i) {
      out[i] = label_sample(schedules[i], backend, runs, classes);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < schedules.size(); i = next++) {
          out[i] = label_sample(schedules[i], backend, runs, classes);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next = schedules.size();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::map<int, std::int64_t> class_counts(std::span<const LabeledSample> rows) {
  std::map<int, std::int64_t> counts;
  for (const auto& r : rows) ++counts[r.label];
  return counts;
}

std::vector<LabeledSample> balance_classes(std::span<const LabeledSample> rows,
                                           std::int64_t min_per_class, std::uint64_t seed) {
  const auto counts = class_counts(rows);
  std::int64_t target = -1;
  for (const auto& [label, n] : counts) {
    if (n >= min_per_class && (target < 0 || n < target)) target = n;
  }
  if (target < 0 || target == 0) {
    throw Error(ErrorCode::AllClassesBelowMinimum,
                "no class has at least " + std::to_string(min_per_class) + " rows");
  }
  std::vector<char> keep(rows.size(), 0);
  Rng rng(seed);
  for (const auto& [label, n] : counts) {
    if (n < min_per_class) {
      warn("dropping class " + std::to_string(label) + " with " + std::to_string(n) +
           " rows (minimum " + std::to_string(min_per_class) + ")");
      continue;
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].label == label) members.push_back(i);
    }
    if (static_cast<std::int64_t>(members.size()) > target) {
      rng.shuffle(members);
      members.resize(static_cast<std::size_t>(target));
    }
    for (auto i : members) keep[i] = 1;
  }
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (keep[i]) out.push_back(rows[i]);
  }
  return out;
}

SplitDataset split_dataset(std::span<const LabeledSample> rows, std::uint64_t seed) {
  if (rows.size() < 10) {
    throw Error(ErrorCode::TooFewRows, "need at least 10 rows, got " + std::to_string(rows.size()));
  }
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const double n = static_cast<double>(rows.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * kTrainFraction));
  const auto n_valid = static_cast<std::size_t>(std::llround(n * kValidFraction));
  SplitDataset split;
  split.seed = seed;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const LabeledSample& row = rows[order[k]];
    if (k < n_train) {
      split.train.push_back(row);
    } else if (k < n_train + n_valid) {
      split.valid.push_back(row);
    } else {
      split.test.push_back(row);
    }
  }
  return split;
}

std::vector<int> class_indices(std::span<const LabeledSample> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const int k = unroll_class_index(r.label);
    if (k < 0) throw Error(ErrorCode::LabelNotInClassSet, "label " + std::to_string(r.label));
    out.push_back(k);
  }
  return out;
}

std::filesystem::path timings_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".timings.csv");
}

namespace {

std::string timings_header() {
  std::string h = "sample_id";
  for (int u : kUnrollFactors) h += ",f" + std::to_string(u);
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

void save_csv(std::span<const LabeledSample> rows, const std::filesystem::path& path) {
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f << csv_header() << "\n";
    for (const auto& r : rows) f << encode_csv_row(r.features, r.label) << "\n";
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
  }
  const bool timed = !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const auto& r) {
    return !r.timing.empty();
  });
  const auto side = timings_path(path);
  if (!timed) {
    std::error_code ec;
    std::filesystem::remove(side, ec);
    return;
  }
  std::ofstream f(side, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + side.string());
  f << timings_header() << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f << i;
    for (int u : kUnrollFactors) {
      f << ",";
      if (const auto it = rows[i].timing.find(u); it != rows[i].timing.end()) {
        f << format_double(it->second);
      }
    }
    f << "\n";
  }
}

std::vector<LabeledSample> load_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = detail::split(text, '\n');
  if (lines.empty() || detail::trim(lines[0]) != csv_header()) {
    throw Error(ErrorCode::HeaderMismatch, path.string() + ": unexpected header");
  }
  std::vector<LabeledSample> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto line = detail::trim(lines[n]);
    if (line.empty()) continue;
    try {
      auto [fv, label] = decode_csv_row(line);
      rows.push_back(LabeledSample{fv, label, {}});
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow,
                  path.string() + ":" + std::to_string(n + 1) + ": " + strip_code_prefix(e),
                  std::string(line));
    }
  }

  const auto side = timings_path(path);
  if (!std::filesystem::exists(side)) return rows;
  const std::string timing_text = read_file(side);
  const auto timing_lines = detail::split(timing_text, '\n');
  if (timing_lines.empty() || detail::trim(timing_lines[0]) != timings_header()) {
    throw Error(ErrorCode::HeaderMismatch, side.string() + ": unexpected header");
  }
  for (std::size_t n = 1; n < timing_lines.size(); ++n) {
    const auto line = detail::trim(timing_lines[n]);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    const auto id = detail::parse_int(fields[0]);
    if (fields.size() != kUnrollFactors.size() + 1 || !id || *id < 0 ||
        static_cast<std::size_t>(*id) >= rows.size()) {
      throw Error(ErrorCode::MalformedRow, side.string() + ":" + std::to_string(n + 1),
                  std::string(line));
    }
    auto& timing = rows[static_cast<std::size_t>(*id)].timing;
    for (std::size_t k = 0; k < kUnrollFactors.size(); ++k) {
      if (fields[k + 1].empty()) continue;
      const auto v = detail::parse_double(fields[k + 1]);
      if (!v) {
        throw Error(ErrorCode::MalformedRow, side.string() + ":" + std::to_string(n + 1),
                    std::string(line));
      }
      timing[kUnrollFactors[k]] = *v;
    }
  }
  return rows;
}

}  // namespace unroll_tuner
