// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rng {

/// Machine-readable error categories shared by the library, CLI and service.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidCamera,
  kDegenerateScale,
  kNotApplicable,
  kEmptyInput,
  kShapeMismatch,
  kStructural,
  kStaleCache,
  kUnsealedCache,
  kConfigMismatch,
  kCorruptFile,
  kIo,
  kNonFinite,
  kNotFound,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace rng
