// Copyright 2026 The fairkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairkd/error.hpp"

namespace fairkd {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kUninitializedStats: return "UninitializedStats";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyIdentity: return "EmptyIdentity";
    case ErrorCode::kDuplicateIdentityAcrossSources: return "DuplicateIdentityAcrossSources";
    case ErrorCode::kDuplicateSample: return "DuplicateSample";
    case ErrorCode::kEpochOutOfRange: return "EpochOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyManifest: return "EmptyManifest";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kFrozenViolation: return "FrozenViolation";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kMissingSample: return "MissingSample";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kTooFewPairs: return "TooFewPairs";
    case ErrorCode::kTooFewGroups: return "TooFewGroups";
    case ErrorCode::kInsufficientIdentities: return "InsufficientIdentities";
    case ErrorCode::kOddPairCount: return "OddPairCount";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kFixtureFormatError: return "FixtureFormatError";
  }
  return "Unknown";
}

}  // namespace fairkd
