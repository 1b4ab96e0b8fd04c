#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mcmccert {

// Runs fn(i) for i in [0, n). Work items are claimed through an atomic
// counter; every item writes only to its own output slot, so results do not
// depend on the schedule. The first exception thrown by any worker is
// rethrown on the caller's thread.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  int nw = threads;
  if (static_cast<std::size_t>(nw) > n) nw = static_cast<int>(n);
  pool.reserve(static_cast<std::size_t>(nw));
  for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mcmccert
