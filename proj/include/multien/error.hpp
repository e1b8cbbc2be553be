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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multien {

enum class ErrorCode {
  kParseError,
  kDuplicateTimestamp,
  kNonMonotonicTimestamps,
  kIncompatibleInterval,
  kAllMissingColumn,
  kEmptyRange,
  kMissingSourceParams,
  kEmptySlice,
  kConstantInput,
  kTooShort,
  kTooFewSources,
  kConstantPredictor,
  kPerfectFit,
  kLeverageOne,
  kDegenerateSize,
  kNonFiniteLoss,
  kNonFiniteFeature,
  kShapeMismatch,
  kPlanMismatch,
  kSingleClass,
  kInvalidSpec,
  kInvalidConfig,
  kLengthMismatch,
  kIo,
};

// Stable identifier used in machine-readable diagnostics ("MENERR:<name>:").
std::string_view error_code_name(ErrorCode code);

// True for errors raised by numerical procedures rather than by bad input.
bool is_numeric_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal diagnostics go here. Quiet by default in tests.
void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace multien
