#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dfr {

/// Run fn(i) for i in [0, count) on up to `jobs` threads. Work items must be
/// independent; each writes only its own output slot, so scheduling order
/// cannot affect results. The first exception thrown by any item is rethrown.
inline void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  if (jobs <= 1 || count == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(jobs, count);
  std::vector<std::thread> pool;
  std::mutex mu;
  std::exception_ptr first_error;
  std::size_t next = 0;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (first_error || next >= static_cast<std::size_t>(count)) return;
          i = next++;
        }
        try {
          fn(static_cast<int>(i));
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline int default_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace dfr
