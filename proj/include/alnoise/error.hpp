// Copyright (c) 2026 The alnoise Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace aln {

enum class ErrorCode {
  kInvalidArgument,
  kNonFinite,
  kShapeMismatch,
  kInvalidProbVec,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kDuplicateId,
  kEmptySplit,
  kMissingClass,
  kIo,
  kCoverage,
  kState,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kInvalidProbVec: return "invalid_prob_vec";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kBadVersion: return "bad_version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kEmptySplit: return "empty_split";
    case ErrorCode::kMissingClass: return "missing_class";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kCoverage: return "coverage";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

}  // namespace aln
