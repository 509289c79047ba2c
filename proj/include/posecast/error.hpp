// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace posecast {

enum class ErrorCode {
  NonPositiveScale,
  SingularTransform,
  DimensionMismatch,
  InvalidTemplate,
  InvalidArgument,
  NonFiniteGradient,
  NonFiniteObjective,
  NonFiniteUpdate,
  Parse,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures onto exit statuses without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace posecast
