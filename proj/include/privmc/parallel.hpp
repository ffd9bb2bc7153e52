#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace privmc {

// Global worker cap. Defaults to 1; the CLI raises it via --threads.
// Results never depend on this value: work is cut into fixed-size chunks and
// partial results are combined in a fixed pairwise order.
inline int& max_threads_ref() {
  static int value = 1;
  return value;
}

inline int max_threads() { return max_threads_ref(); }

inline void set_max_threads(int n) {
  if (n < 1) throw std::invalid_argument("set_max_threads: need n >= 1");
  max_threads_ref() = n;
}

// Runs fn(chunk_index, begin, end) for every chunk of [0, count) of width
// chunk_size. Chunks are distributed over std::threads round-robin; with one
// worker everything runs inline on the caller.
template <class Fn>
void for_each_chunk(std::size_t count, std::size_t chunk_size, Fn&& fn) {
  if (count == 0) return;
  if (chunk_size == 0) throw std::invalid_argument("for_each_chunk: chunk_size == 0");
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_threads()), nchunks);
  auto run_range = [&](std::size_t worker) {
    for (std::size_t c = worker; c < nchunks; c += workers) {
      const std::size_t begin = c * chunk_size;
      const std::size_t end = std::min(begin + chunk_size, count);
      fn(c, begin, end);
    }
  };
  if (workers <= 1) {
    run_range(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_range, w);
  run_range(0);
  for (auto& t : pool) t.join();
}

// Chunked map-reduce with a bit-reproducible combine order: partials are
// produced per chunk (in parallel), then folded pairwise over the chunk
// index sequence. The tree shape depends only on the chunk count, never on
// the worker count, so floating-point sums come out identical for any
// --threads value.
template <class T, class MakeFn, class CombineFn>
T chunked_tree_reduce(std::size_t count, std::size_t chunk_size, T identity,
                      MakeFn&& make_partial, CombineFn&& combine) {
  if (count == 0) return identity;
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  std::vector<T> partials(nchunks, identity);
  for_each_chunk(count, chunk_size, [&](std::size_t c, std::size_t begin, std::size_t end) {
    partials[c] = make_partial(begin, end);
  });
  std::size_t len = nchunks;
  while (len > 1) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i)
      partials[i] = combine(std::move(partials[2 * i]), std::move(partials[2 * i + 1]));
    if (len % 2 == 1) partials[half] = std::move(partials[len - 1]);
    len = half + (len % 2);
  }
  return std::move(partials[0]);
}

}  // namespace privmc
