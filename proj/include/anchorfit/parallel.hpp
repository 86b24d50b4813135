#pragma once

#include <functional>

namespace anchorfit {

// Worker cap resolved from ANCHORFIT_THREADS (0 or unset = auto).
int worker_thread_count();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots by
// the caller; the function never reorders or merges work, so output is
// identical whatever the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace anchorfit
