#include "core/parallel.hpp"

#include <cstdlib>

namespace pf {

namespace {
std::atomic<int> g_thread_cap{0};

int env_threads() {
  const char* v = std::getenv("PARFLOW_THREADS");
  if (!v) return 0;
  int n = std::atoi(v);
  return n > 0 ? n : 0;
}
}  // namespace

int max_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int cap = g_thread_cap.load();
  if (cap <= 0) cap = env_threads();
  if (cap <= 0) cap = hw;
  return cap < hw ? cap : hw;
}

void set_thread_cap(int n) { g_thread_cap.store(n > 0 ? n : 0); }

void for_chunks(std::int64_t n, int n_chunks,
                const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0 || n_chunks <= 0) return;
  if (n_chunks > n) n_chunks = static_cast<int>(n);
  auto chunk_range = [&](int c) {
    std::int64_t begin = n * c / n_chunks;
    std::int64_t end = n * (c + 1) / n_chunks;
    return std::pair<std::int64_t, std::int64_t>{begin, end};
  };

  int workers = max_threads();
  if (workers <= 1 || n_chunks == 1) {
    for (int c = 0; c < n_chunks; ++c) {
      auto [b, e] = chunk_range(c);
      fn(c, b, e);
    }
    return;
  }

  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= n_chunks) return;
      auto [b, e] = chunk_range(c);
      fn(c, b, e);
    }
  };
  std::vector<std::thread> pool;
  int spawn = workers < n_chunks ? workers : n_chunks;
  pool.reserve(static_cast<std::size_t>(spawn - 1));
  for (int i = 0; i < spawn - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace pf
