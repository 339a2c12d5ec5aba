/*
 * Copyright 2026 The ccshap Authors.
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

#ifndef CCSHAP_ERROR_H_
#define CCSHAP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccshap {

enum class ErrorKind {
  kConfig,        // bad flag, bad numeric range, unknown enum value
  kTemplate,      // prompt template missing a placeholder
  kIngestion,     // unreadable corpus file
  kData,          // corpus content violates a precondition
  kContract,      // caller broke an API precondition (length mismatch, ...)
  kTraining,      // optimizer diverged
  kTransport,     // remote backend unreachable / 5xx / timeout
  kProtocol,      // remote backend answered with something unparsable
  kInternal,      // backend produced a value we cannot use (NaN, ...)
  kVerification,  // oracle tolerance breached
};

std::string_view ErrorKindName(ErrorKind kind);

// Process exit code the CLI uses for an error of this kind:
// 1 usage/config, 2 data, 3 backend/transport, 4 verification.
int ExitCodeFor(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ccshap

#endif  // CCSHAP_ERROR_H_
