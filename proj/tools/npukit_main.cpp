// SPDX-License-Identifier: Apache-2.0
#include "npukit/cli.hpp"

int main(int argc, char** argv) { return npukit::cli_main(argc, argv); }
