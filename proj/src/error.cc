// Copyright (c) 2026 SDPN-DR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdpn/error.h"

namespace sdpn {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroVarianceColumn: return "ZeroVarianceColumn";
    case ErrorCode::kDuplicateEmbedding: return "DuplicateEmbedding";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDistributionLengthMismatch:
      return "DistributionLengthMismatch";
    case ErrorCode::kBatchTooSmall: return "BatchTooSmall";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kUtteranceTooShort: return "UtteranceTooShort";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDegenerateCohort: return "DegenerateCohort";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kSingleClassInput: return "SingleClassInput";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kGradCheckFailed: return "GradCheckFailed";
  }
  return "Unknown";
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kNonPositiveTemperature:
    case ErrorCode::kKTooLarge:
      return 1;
    case ErrorCode::kDivergedLoss:
    case ErrorCode::kGradCheckFailed:
    case ErrorCode::kZeroVarianceColumn:
    case ErrorCode::kDuplicateEmbedding:
      return 3;
    default:
      return 2;
  }
}

}  // namespace sdpn
