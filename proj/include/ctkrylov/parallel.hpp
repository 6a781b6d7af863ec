#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace ctkrylov {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

inline int thread_count() { return detail::thread_count_slot().load(); }

/// n <= 0 selects the hardware concurrency.
inline void set_thread_count(int n) {
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  detail::thread_count_slot().store(n);
}

/// Static block partition of [begin, end). Each index is processed exactly
/// once and results must be written to disjoint slots, so the outcome does
/// not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn) {
  const std::size_t count = end > begin ? end - begin : 0;
  const int nthreads = thread_count();
  if (nthreads <= 1 || count < 2) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(nthreads, count);
  const std::size_t chunk = (count + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t lo = begin + t * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ctkrylov
