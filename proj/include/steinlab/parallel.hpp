#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

namespace steinlab {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `block_fn(lo, hi)` over fixed-size blocks of [0, n_items) and merges
/// the partial results in block order.  The block layout depends only on
/// n_items and block_size, never on the thread count, so the reduction is
/// bitwise identical for threads = 1 and threads = N.
template <typename Partial, typename BlockFn, typename MergeFn>
Partial parallel_blocks(std::size_t n_items, int threads, std::size_t block_size,
                        Partial init, BlockFn&& block_fn, MergeFn&& merge) {
  if (block_size == 0) throw std::invalid_argument("parallel_blocks: block_size == 0");
  const std::size_t n_blocks = (n_items + block_size - 1) / block_size;
  std::vector<Partial> partials(n_blocks, init);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) break;
      const std::size_t lo = b * block_size;
      const std::size_t hi = std::min(n_items, lo + block_size);
      partials[b] = block_fn(lo, hi);
    }
  };

  const int t = std::min<std::size_t>(std::max(1, resolve_threads(threads)), std::max<std::size_t>(n_blocks, 1));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  Partial acc = init;
  for (const auto& p : partials) merge(acc, p);
  return acc;
}

inline constexpr std::size_t kMcBlockSize = 1024;

}  // namespace steinlab
