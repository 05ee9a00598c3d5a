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

#ifndef UNROLL_TUNER_ERROR_HPP_
#define UNROLL_TUNER_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace unroll_tuner {

enum class ErrorCode {
  // ir / parsing
  ParseError,
  InvalidProgram,
  // schedule
  UnknownLevel,
  FactorNotPowerOfTwo,
  FactorOutOfRange,
  InvalidFactor,
  DuplicateTransform,
  NonAdjacentLevels,
  // featurize
  DepthExceedsMax,
  EmptyTrainingSet,
  LabelNotInClassSet,
  // backend
  ToolchainMissing,
  CompileError,
  RunTimeout,
  RunFailed,
  // dataset
  AllClassesBelowMinimum,
  TooFewRows,
  HeaderMismatch,
  MalformedRow,
  // mlp
  DimensionMismatch,
  EmptySplit,
  ModelNotTrained,
  FormatVersionMismatch,
  CorruptFile,
  // eval
  NonPositiveTime,
  EmptyTestSet,
  // misc
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library. `detail()` carries auxiliary text such
// as compiler diagnostics or the offending line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Warnings go to stderr unless silenced (tests silence them).
void warn(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_ERROR_HPP_
