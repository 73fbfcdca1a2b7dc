// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/cli.hpp"

int main(int argc, char** argv) { return sgr::cli::dispatch(argc, argv); }
