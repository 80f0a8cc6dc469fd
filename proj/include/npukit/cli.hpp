// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace npukit {

/// Command-line entry point. Exit codes: 0 success, 1 usage error,
/// 2 infeasible tile plan, 3 I/O error.
int cli_main(int argc, const char* const* argv);

}  // namespace npukit
