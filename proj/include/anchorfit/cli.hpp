#pragma once

namespace anchorfit {

// Runs one CLI invocation. Exit codes: 0 success, 1 validation/usage error,
// 2 divergence or tolerance failure.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace anchorfit
