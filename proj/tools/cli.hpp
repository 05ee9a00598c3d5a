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

#ifndef UNROLL_TUNER_TOOLS_CLI_HPP_
#define UNROLL_TUNER_TOOLS_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unroll_tuner/backend.hpp"
#include "unroll_tuner/baselines.hpp"
#include "unroll_tuner/dataset.hpp"
#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/generator.hpp"
#include "unroll_tuner/mlp.hpp"

namespace unroll_tuner::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPipeline = 2;

struct CliConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string backend = "cost";
  int runs = 30;
  std::vector<int> classes = default_classes();
  int count = 100;

  GenConfig gen;
  CostModelParams cost;
  ToolchainConfig toolchain;
  TrainConfig train;
  std::int64_t min_per_class = 10;
  ScalerMode scaler = ScalerMode::Standardize;
  KnnConfig knn;
  TreeConfig tree;
};

// Flat `key = value` lines; `#` starts a comment. Throws Error{ParseError}
// with the line number on malformed lines.
std::map<std::string, std::string> parse_config_text(std::string_view text);

// Throws Error{InvalidConfig} for unknown keys or bad values.
void apply_config_entry(CliConfig& cfg, const std::string& key, const std::string& value);

// "0,2,4" -> {0, 2, 4}; every entry must belong to U.
std::vector<int> parse_classes(std::string_view text);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unroll_tuner::cli

#endif  // UNROLL_TUNER_TOOLS_CLI_HPP_
