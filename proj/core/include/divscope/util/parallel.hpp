#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace divscope::util {

struct ChunkRange {
  std::size_t index;
  std::size_t begin;
  std::size_t end;
};

inline std::size_t chunk_count(std::size_t n, std::size_t grain) {
  return n == 0 ? 0 : (n + grain - 1) / grain;
}

// Runs fn over fixed chunks of [0, n). Chunk boundaries depend only on n and
// grain, never on the thread count, so chunk-indexed reductions merged in
// order produce bit-identical results at any parallelism degree.
inline void for_each_chunk(std::size_t n, std::size_t grain, unsigned threads,
                           const std::function<void(const ChunkRange&)>& fn) {
  const std::size_t chunks = chunk_count(n, grain);
  if (chunks == 0) return;
  if (threads <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      fn({c, c * grain, std::min(n, (c + 1) * grain)});
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        std::size_t c = next.fetch_add(1);
        if (c >= chunks) break;
        try {
          fn({c, c * grain, std::min(n, (c + 1) * grain)});
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// Per-chunk accumulators combined in chunk order.
template <typename Acc>
Acc reduce_chunks(std::size_t n, std::size_t grain, unsigned threads,
                  const std::function<void(const ChunkRange&, Acc&)>& body,
                  const std::function<void(Acc&, Acc&)>& merge) {
  const std::size_t chunks = chunk_count(n, grain);
  std::vector<Acc> partial(chunks);
  for_each_chunk(n, grain, threads,
                 [&](const ChunkRange& r) { body(r, partial[r.index]); });
  Acc out{};
  for (auto& p : partial) merge(out, p);
  return out;
}

inline constexpr std::size_t kDefaultGrain = 512;

}  // namespace divscope::util
