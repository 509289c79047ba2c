// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace posecast::cli {

/// Exit statuses shared by every command.
enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,  // gradient threshold exceeded or fit did not converge
  kParseError = 2,   // bad flags, unreadable or invalid input files
  kIoError = 3,      // output could not be written
  kNonFinite = 4,    // optimizer produced a non-finite update
};

/// Entry point behind the posecast executable. Machine-readable output goes
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace posecast::cli
