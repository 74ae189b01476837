// Copyright 2026 The Relabel Authors. All Rights Reserved.
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

#ifndef RELABEL_ERROR_HPP_
#define RELABEL_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace relabel {

// Error categories. The numeric values are mirrored by rlb_status in the C
// API, so append only.
enum class ErrorCode {
  kInvalidArgument = 1,
  kParse = 2,
  kNotFound = 3,
  kDuplicate = 4,
  kStageOrder = 5,
  kUndefinedMetric = 6,
  kDegenerate = 7,
  kUnauthorized = 8,
  kIo = 9,
  kNotReady = 10,
  kForbidden = 11,
  kInternal = 12,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)),
        code_(code),
        field_(std::move(field)) {}

  ErrorCode code() const { return code_; }
  // Name of the offending input field, when one applies.
  const std::string& field() const { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace relabel

#endif  // RELABEL_ERROR_HPP_
