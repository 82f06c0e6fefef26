// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace metasel {

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on runtime
/// failure, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace metasel
