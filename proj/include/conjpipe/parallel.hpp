#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace conjpipe::par {

// Index-based fan-out over [0, n). Results keyed by index stay deterministic
// regardless of scheduling. `fn` must not throw; callers convert failures
// into per-index results.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  const size_t thread_count = std::min<size_t>(static_cast<size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(thread_count);
  for (size_t t = 0; t < thread_count; ++t) {
    threads.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace conjpipe::par
