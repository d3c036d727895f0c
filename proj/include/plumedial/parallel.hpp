#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace plumedial {

// Worker count: explicit request > PLUMEDIAL_THREADS > hardware concurrency.
inline int resolve_thread_count(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PLUMEDIAL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(task) for task = 0..n_tasks-1 on up to n_threads workers. Tasks
// must write results into per-task slots; callers reduce those slots in task
// order afterwards, which keeps floating-point results independent of the
// scheduling.
template <typename Fn>
void parallel_for(int n_tasks, int n_threads, Fn&& fn) {
  n_threads = std::min(resolve_thread_count(n_threads), n_tasks);
  if (n_threads <= 1) {
    for (int t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= n_tasks) return;
      fn(t);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads) - 1);
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace plumedial
