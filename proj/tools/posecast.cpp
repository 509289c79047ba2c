// Copyright Contributors to the posecast project
// SPDX-License-Identifier: Apache-2.0
//
#include "posecast/cli.hpp"

int main(int argc, char** argv) { return posecast::cli::run(argc, argv); }
