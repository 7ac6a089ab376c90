#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace pf {

/// Number of worker threads to use: min(PARFLOW_THREADS or explicit cap, hardware).
int max_threads();

/// Caps the worker count (0 restores the environment/hardware default).
void set_thread_cap(int n);

/// Runs fn(chunk, begin, end) over [0, n) split into n_chunks contiguous ranges.
/// Chunk boundaries depend only on (n, n_chunks), never on the thread count, so
/// any per-chunk accumulation combined in chunk order is reproducible.
void for_chunks(std::int64_t n, int n_chunks,
                const std::function<void(int chunk, std::int64_t begin, std::int64_t end)>& fn);

/// Deterministic map-reduce: per-chunk partials of type T combined in chunk order.
template <typename T, typename Map, typename Combine>
T chunked_reduce(std::int64_t n, T init, Map&& map, Combine&& combine, int n_chunks = 256) {
  if (n <= 0) return init;
  if (n_chunks > n) n_chunks = static_cast<int>(n);
  std::vector<T> partial(static_cast<std::size_t>(n_chunks), init);
  for_chunks(n, n_chunks, [&](int chunk, std::int64_t begin, std::int64_t end) {
    partial[static_cast<std::size_t>(chunk)] = map(begin, end);
  });
  T acc = init;
  for (const T& p : partial) acc = combine(acc, p);
  return acc;
}

}  // namespace pf
