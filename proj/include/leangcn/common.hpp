#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace leangcn {

// ============================================================================
// scalar allocation accounting
// ============================================================================
//
// Every matrix buffer in the library reports its element count here, so tests
// can bound the transient working set of a kernel in *scalars* and compare it
// against the analytic memory model. Counters are thread_local: parallel test
// shards never see each other's allocations.

namespace alloc {

struct Stats {
  std::uint64_t live = 0;  // currently allocated scalars
  std::uint64_t peak = 0;  // high-water mark since last reset
};

inline Stats& stats() {
  thread_local Stats s;
  return s;
}

// Restart the high-water mark at the current live count.
inline void reset_peak() { stats().peak = stats().live; }

inline void track(std::uint64_t n) {
  auto& s = stats();
  s.live += n;
  if (s.live > s.peak) s.peak = s.live;
}

inline void untrack(std::uint64_t n) { stats().live -= n; }

}  // namespace alloc

// ============================================================================
// numeric helpers
// ============================================================================

inline bool is_finite(double v) { return std::isfinite(v); }

inline bool all_finite(std::span<const double> xs) {
  for (double v : xs)
    if (!std::isfinite(v)) return false;
  return true;
}

// Relative difference with a unit floor, symmetric in its arguments.
inline double rel_diff(double a, double b) {
  double denom = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / denom;
}

// Pairwise (cascade) summation. Deterministic for a fixed input order and
// much better conditioned than a running sum for long Monte Carlo streams.
inline double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double acc = 0.0;
    for (double v : xs) acc += v;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace leangcn
