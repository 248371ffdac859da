#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <thread>
#include <vector>

namespace octsim {

/// Additive identity; Eigen fixed-size types are not zeroed by `T{}`.
template <typename T>
T zero_value() {
  if constexpr (requires { T::Zero(); }) {
    return T::Zero();
  } else {
    return T(0.0);
  }
}

/// Pairwise (cascade) summation of f(0..n-1). The recursion splits at fixed
/// midpoints, so the rounding pattern depends only on n.
template <typename T, typename F>
T pairwise_sum(std::size_t begin, std::size_t end, const F& f) {
  constexpr std::size_t kLeaf = 16;
  if (end - begin <= kLeaf) {
    T acc = zero_value<T>();
    for (std::size_t i = begin; i < end; ++i) acc += f(i);
    return acc;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum<T>(begin, mid, f) + pairwise_sum<T>(mid, end, f);
}

template <typename T, typename F>
T pairwise_sum(std::size_t n, const F& f) {
  return pairwise_sum<T>(std::size_t{0}, n, f);
}

/// Runs body(i) for i in [0, n) on up to `threads` workers with static
/// contiguous chunks. Each index is handled by exactly one worker, so results
/// written to per-index slots do not depend on the thread count.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, const F& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// sin(x)/x with the removable singularity filled in.
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

}  // namespace octsim
