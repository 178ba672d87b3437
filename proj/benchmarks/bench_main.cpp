// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a ships LTO bytecode from another compiler
// release, so the entry point lives here.
BENCHMARK_MAIN();
