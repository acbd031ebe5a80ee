#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace tss {

/// Process-wide worker cap for parallel_for. 1 = sequential (default).
inline std::atomic<int>& worker_thread_setting() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_worker_threads(int n) {
  worker_thread_setting().store(n < 1 ? 1 : n);
}

inline int worker_threads() { return worker_thread_setting().load(); }

/// Runs fn(i) for i in [0, n). Work items must be independent; results are
/// identical for any thread count.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const int threads = worker_threads();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace tss
