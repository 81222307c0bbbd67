#pragma once

#include <exception>
#include <thread>
#include <vector>

namespace rlv {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index writes
// its own output slot, so results never depend on scheduling. If several
// indices throw, the exception from the lowest index is rethrown.
template <class Body> void parallel_for(int n, int threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  const int nt = std::min(threads, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += nt) {
        try {
          body(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace rlv
