// Copyright Contributors to the figs Project
// SPDX-License-Identifier: Apache-2.0

#include "figs/cli.hpp"

int main(int argc, char** argv) { return figs::cli::run(argc, argv); }
