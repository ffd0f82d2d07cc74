#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace csieve::detail {

inline int resolve_threads(int requested, std::int64_t work_items) {
  int t = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  if (work_items < t) t = static_cast<int>(std::max<std::int64_t>(1, work_items));
  return t;
}

/// Runs fn(begin, end, chunk_index) over [0, n) split into contiguous chunks,
/// one per thread. Callers must make per-chunk results combinable in chunk
/// order (or order-free, e.g. exact integer sums) so output does not depend on
/// scheduling.
template <class Fn>
void for_chunks(std::int64_t n, int threads, Fn&& fn) {
  const int t = resolve_threads(threads, n);
  if (t == 1) {
    fn(std::int64_t{0}, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  const std::int64_t base = n / t;
  const std::int64_t extra = n % t;
  std::int64_t begin = 0;
  for (int i = 0; i < t; ++i) {
    const std::int64_t len = base + (i < extra ? 1 : 0);
    const std::int64_t end = begin + len;
    pool.emplace_back([&fn, begin, end, i] { fn(begin, end, i); });
    begin = end;
  }
  for (auto& th : pool) th.join();
}

}  // namespace csieve::detail
