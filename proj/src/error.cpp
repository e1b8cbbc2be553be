/*
 * Copyright 2026 The multien Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "multien/error.hpp"

#include <atomic>
#include <iostream>

namespace multien {
namespace {
std::atomic<bool> g_warnings_enabled{true};
}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::kNonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::kIncompatibleInterval: return "IncompatibleInterval";
    case ErrorCode::kAllMissingColumn: return "AllMissingColumn";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kMissingSourceParams: return "MissingSourceParams";
    case ErrorCode::kEmptySlice: return "EmptySlice";
    case ErrorCode::kConstantInput: return "ConstantInput";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kTooFewSources: return "TooFewSources";
    case ErrorCode::kConstantPredictor: return "ConstantPredictor";
    case ErrorCode::kPerfectFit: return "PerfectFit";
    case ErrorCode::kLeverageOne: return "LeverageOne";
    case ErrorCode::kDegenerateSize: return "DegenerateSize";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kPlanMismatch: return "PlanMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool is_numeric_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNonFiniteFeature:
    case ErrorCode::kPerfectFit:
    case ErrorCode::kLeverageOne:
    case ErrorCode::kConstantPredictor:
      return true;
    default:
      return false;
  }
}

void log_warning(std::string_view message) {
  if (g_warnings_enabled.load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_warnings_enabled(bool enabled) {
  g_warnings_enabled.store(enabled, std::memory_order_relaxed);
}

}  // namespace multien
