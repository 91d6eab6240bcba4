// Deterministic task-parallel loops. Work is cut into chunks whose layout
// depends only on the problem size, never on the worker count, so per-slot
// writes and chunk-ordered reductions give bit-identical results for any
// number of threads.
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dualscope {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DUALSCOPE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// fn(chunk_index, begin, end); chunk boundaries are a pure function of n.
template <class Fn>
void parallel_chunks(int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  const int64_t n_chunks = std::min<int64_t>(n, 256);
  const auto chunk_begin = [n, n_chunks](int64_t c) {
    return c * n / n_chunks;
  };
  threads = std::min<int64_t>(resolve_threads(threads), n_chunks);
  if (threads <= 1) {
    for (int64_t c = 0; c < n_chunks; ++c)
      fn(c, chunk_begin(c), chunk_begin(c + 1));
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c, chunk_begin(c), chunk_begin(c + 1));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

template <class Fn>
void parallel_for(int64_t n, int threads, Fn&& fn) {
  parallel_chunks(n, threads, [&fn](int64_t, int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace dualscope
