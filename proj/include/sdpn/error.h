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

#ifndef SDPN_ERROR_H_
#define SDPN_ERROR_H_

#include <stdexcept>
#include <string>

namespace sdpn {

enum class ErrorCode {
  kZeroVarianceColumn,
  kDuplicateEmbedding,
  kNonPositiveTemperature,
  kZeroVector,
  kShapeMismatch,
  kDistributionLengthMismatch,
  kBatchTooSmall,
  kInvalidConfig,
  kUtteranceTooShort,
  kMalformedFile,
  kIoError,
  kDegenerateCohort,
  kKTooLarge,
  kMissingEmbedding,
  kSingleClassInput,
  kDivergedLoss,
  kGradCheckFailed,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// Process exit status for the command-line tool: 1 usage/config,
// 2 data, 3 numerical failure.
int ExitCodeFor(ErrorCode code);

}  // namespace sdpn

#endif  // SDPN_ERROR_H_
