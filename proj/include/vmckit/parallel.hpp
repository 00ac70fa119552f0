#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vmckit {

/// Process-wide worker count used by parallel_for. 1 means run inline.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n). Each index must write only its own output slot;
/// callers reduce the slots afterwards in index order so results do not depend on
/// the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, num_threads()));
  if (workers == 1 || n < 2 * workers) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vmckit
