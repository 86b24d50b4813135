#include "anchorfit/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace anchorfit {

int worker_thread_count() {
  static const int cached = [] {
    const char* env = std::getenv("ANCHORFIT_THREADS");
    int requested = 0;
    if (env && *env) requested = std::atoi(env);
    if (requested <= 0) {
      const unsigned hw = std::thread::hardware_concurrency();
      requested = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return requested < 1 ? 1 : requested;
  }();
  return cached;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace anchorfit
