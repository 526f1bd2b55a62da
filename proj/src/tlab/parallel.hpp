#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tlab {

// Calls fn(k) for k in [0, n), strided over up to `threads` workers. The
// first exception thrown by any call is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t cap = std::max<std::size_t>(n, 1);
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, cap));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    workers.emplace_back([&, t] {
      for (std::size_t k = t; k < n; k += threads) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          return;
        }
      }
    });
  for (auto& w : workers) w.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace tlab
