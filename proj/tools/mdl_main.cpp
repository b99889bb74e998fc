// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "mdl/cli/commands.hpp"

int main(int argc, char** argv) { return mdl::cli::run_cli(argc, argv, std::cout, std::cerr); }
