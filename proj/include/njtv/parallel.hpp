#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace njtv {

/// Process-wide worker count for voxel loops. Numeric results do not depend
/// on it: work is chunked on fixed boundaries and partials are combined in
/// chunk order.
inline int& thread_count() {
  static int n = 1;
  return n;
}

/// Evaluates body(chunk) for chunk = 0..n_chunks-1, each returning a double
/// partial, and sums the partials in chunk order.
template <typename Body>
inline double chunked_reduce(int n_chunks, Body&& body) {
  const int workers = std::max(1, std::min(thread_count(), n_chunks));
  std::vector<double> partial(static_cast<size_t>(n_chunks), 0.0);
  if (workers == 1) {
    for (int c = 0; c < n_chunks; ++c)
      partial[static_cast<size_t>(c)] = body(c);
  } else {
    std::atomic<int> next{0};
    auto work = [&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= n_chunks) return;
        partial[static_cast<size_t>(c)] = body(c);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
  }
  double sum = 0.0;
  for (double p : partial) sum += p;
  return sum;
}

namespace detail {

/// splitmix64 step; the standard stateless mixer used for derived seeds
/// and per-voxel jitter.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double to_unit_double(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Deterministic child seed: fixed counter lanes off one master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t lane) {
  return detail::splitmix64(master ^ detail::splitmix64(lane));
}

}  // namespace njtv
