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

#ifndef UNROLL_TUNER_INTERPRETER_HPP_
#define UNROLL_TUNER_INTERPRETER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "unroll_tuner/ir.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner {

// Reference executor for loop nests. Integer arithmetic wraps (two's
// complement) and integer division by zero yields 0, matching the emitted
// kernels. Inputs are filled by `initial_value`; the output starts at zero.

using BufferValues = std::variant<std::vector<std::int32_t>, std::vector<std::int64_t>,
                                  std::vector<float>, std::vector<double>>;

struct Buffer {
  std::string name;
  DataType dtype = DataType::Float64;
  std::vector<std::int64_t> shape;  // row-major
  BufferValues values;

  std::size_t size() const;
  double at(std::size_t flat) const;
  // FNV-1a over the little-endian bytes of the elements.
  std::uint64_t checksum() const;
};

struct Execution {
  std::map<std::string, Buffer> buffers;
  std::string output_name;
  std::int64_t body_evaluations = 0;
  std::vector<std::int64_t> store_trace;  // flat output index per store, if recorded

  const Buffer& output() const { return buffers.at(output_name); }
};

struct InterpretOptions {
  bool record_stores = false;
};

// Deterministic fill value for element `flat` of the `ordinal`-th input.
// Integral in [-5, 5] for integer types and a quarter of that for floats.
double initial_value(int ordinal, std::int64_t flat, DataType dtype);

Execution interpret(const Program& p, const InterpretOptions& options = {});
Execution interpret(const ScheduledProgram& sp, const InterpretOptions& options = {});

std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_INTERPRETER_HPP_
