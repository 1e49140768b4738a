#pragma once

// Minimal static-chunk parallel loop. Work is split into fixed contiguous
// ranges, so any reduction done per index is independent of the thread count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pcr {

// Worker count used by parallel_for. 0 or negative means "use the default"
// (PCR_THREADS if set, otherwise hardware concurrency).
void set_thread_count(int threads);
int thread_count();

namespace detail {
extern thread_local bool in_parallel_region;
}

// Calls body(begin, end) over a partition of [0, n). Nested calls run inline.
// The first exception thrown by any chunk is rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1 || detail::in_parallel_region) {
    body(std::size_t{0}, n);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run_chunk = [&](std::size_t w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    detail::in_parallel_region = true;
    try {
      body(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
    detail::in_parallel_region = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_chunk, w);
  run_chunk(0);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pcr
