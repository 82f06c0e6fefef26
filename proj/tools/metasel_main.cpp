// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/cli.hpp"

int main(int argc, char** argv) { return metasel::run_cli(argc, argv); }
