#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace storyreel {

// Process-wide cooperative cancellation (set from the SIGINT handler).
inline std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline void request_stop() { stop_flag().store(true); }
inline bool stop_requested() { return stop_flag().load(); }
inline void clear_stop() { stop_flag().store(false); }

// Runs fn(i) for i in [0, n) on at most `max_parallel` threads. Results must be
// placed by index; completion order is unspecified. The first exception is
// rethrown after all workers finish; remaining indices are skipped once one
// has been thrown.
template <class Fn>
void parallel_for(std::size_t n, int max_parallel, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_parallel)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex err_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed.load(); i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(err_mutex);
            if (!first) first = std::current_exception();
            failed.store(true);
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace storyreel
