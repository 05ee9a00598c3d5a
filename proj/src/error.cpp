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

#include "unroll_tuner/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace unroll_tuner {

namespace {
std::atomic<bool> g_warnings_enabled{true};
std::mutex g_warn_mutex;
}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidProgram: return "InvalidProgram";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::FactorNotPowerOfTwo: return "FactorNotPowerOfTwo";
    case ErrorCode::FactorOutOfRange: return "FactorOutOfRange";
    case ErrorCode::InvalidFactor: return "InvalidFactor";
    case ErrorCode::DuplicateTransform: return "DuplicateTransform";
    case ErrorCode::NonAdjacentLevels: return "NonAdjacentLevels";
    case ErrorCode::DepthExceedsMax: return "DepthExceedsMax";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::LabelNotInClassSet: return "LabelNotInClassSet";
    case ErrorCode::ToolchainMissing: return "ToolchainMissing";
    case ErrorCode::CompileError: return "CompileError";
    case ErrorCode::RunTimeout: return "RunTimeout";
    case ErrorCode::RunFailed: return "RunFailed";
    case ErrorCode::AllClassesBelowMinimum: return "AllClassesBelowMinimum";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::ModelNotTrained: return "ModelNotTrained";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

void warn(std::string_view message) {
  if (!g_warnings_enabled.load(std::memory_order_relaxed)) return;
  std::lock_guard lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

}  // namespace unroll_tuner
