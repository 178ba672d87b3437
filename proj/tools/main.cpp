// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "sedconv/tensor.hpp"

int main(int argc, char** argv) {
  sedconv::retain_freed_memory();
  std::vector<std::string> args(argv + 1, argv + argc);
  return sedconv::cli::run(args, std::cout, std::cerr);
}
