#pragma once

// Deterministic data parallelism: work is cut into fixed-size blocks that do
// not depend on the thread count, and partial results are combined in block
// order, so sums are bit-identical for any number of threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace convint::parallel {

inline constexpr std::size_t kBlock = 2048;

inline int& thread_override() {
  static int n = 0;
  return n;
}

/// Worker count: set_threads() value, else CONVINT_THREADS, else hardware concurrency.
inline int thread_count() {
  if (thread_override() > 0) return thread_override();
  if (const char* env = std::getenv("CONVINT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_threads(int n) { thread_override() = n; }

/// Calls body(block_begin, block_end, block_index) for every block.
template <class Body>
void for_blocks(std::size_t n, Body&& body, std::size_t block = kBlock) {
  const std::size_t blocks = (n + block - 1) / block;
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(thread_count()), blocks));
  auto run = [&](std::size_t b) { body(b * block, std::min(n, (b + 1) * block), b); };
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) run(b);
    });
  }
  for (auto& t : pool) t.join();
}

template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  for_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t i = lo; i < hi; ++i) body(i);
  });
}

/// Sum of term(i) over [0, n) with a fixed blocked reduction order.
template <class Term>
double blocked_sum(std::size_t n, Term&& term) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  for_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

/// Logical AND of pred(i); evaluation may stop early but the answer is order-independent.
template <class Pred>
bool all_of(std::size_t n, Pred&& pred) {
  std::atomic<bool> ok{true};
  for_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t i = lo; i < hi && ok.load(std::memory_order_relaxed); ++i)
      if (!pred(i)) ok.store(false, std::memory_order_relaxed);
  });
  return ok.load();
}

}  // namespace convint::parallel
