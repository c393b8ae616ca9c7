// SPDX-License-Identifier: Apache-2.0
#include "ftmp/cli.hpp"

int main(int argc, char** argv) { return ftmp::cli::run(argc, argv); }
