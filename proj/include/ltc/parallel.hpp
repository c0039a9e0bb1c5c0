#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ltc {

/// Worker count: the LTC_THREADS environment variable if set and positive,
/// otherwise std::thread::hardware_concurrency().
std::size_t thread_count();

// Runs task(i) for i in [0, n) on up to thread_count() workers. Tasks must
// write only to their own slot of caller-owned storage; the caller reduces the
// slots in index order, which keeps results independent of scheduling.
template <class Task>
void parallel_for(std::size_t n, Task&& task) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Number of fixed-size chunks covering `total` items.
inline std::size_t chunk_count(std::size_t total, std::size_t chunk) {
  return (total + chunk - 1) / chunk;
}

}  // namespace ltc
