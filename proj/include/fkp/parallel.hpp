#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace fkp {

// Global worker-count knob. 0 means "use hardware_concurrency". Thread count
// only affects speed: every parallel loop below assigns work by index, so
// results are identical for any setting.
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> count{1};
  return count;
}

inline void set_threads(int n) {
  if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  thread_count_slot().store(n);
}

inline int get_threads() { return thread_count_slot().load(); }

// Runs fn(begin, end) over a partition of [0, n) across the configured
// number of threads. fn must only write to locations owned by its indices.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t threads =
      std::min(static_cast<std::size_t>(get_threads()), n ? n : std::size_t{1});
  if (threads <= 1 || n == 0) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fkp
