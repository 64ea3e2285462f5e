// Copyright 2026 The HumorChain Authors.
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

#ifndef HUMORCHAIN_ERRORS_H_
#define HUMORCHAIN_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace humorchain {

enum class ErrorCode {
  kInvalidArgument,
  kParse,       // malformed input line / text
  kSchema,      // structurally valid JSON missing or violating fields
  kEnum,        // unknown enumeration literal
  kDuplicate,
  kExtraction,  // no JSON object found in model text
  kTransport,
  kTimeout,
  kBackend,     // non-2xx reply
  kStage,       // stage-level post-condition failure (e.g. empty reply)
  kConfig,
  kUndefined,   // metric undefined for the given input
  kDisconnected,
  kNotFound,
  kConflict,
};

std::string_view ErrorCodeName(ErrorCode code);

// Base error for the whole library. `stage` is set once a pipeline stage has
// seen the error, so propagated failures say where they happened.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const std::string& stage() const { return stage_; }
  void set_stage(std::string stage) { stage_ = std::move(stage); }

 private:
  ErrorCode code_;
  std::string stage_;
};

// Non-2xx reply from a chat or embedding backend.
class BackendError : public Error {
 public:
  BackendError(int status, std::string body)
      : Error(ErrorCode::kBackend,
              "backend returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}

  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace humorchain

#endif  // HUMORCHAIN_ERRORS_H_
