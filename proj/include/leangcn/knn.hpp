#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "leangcn/common.hpp"
#include "leangcn/geometry.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/rng.hpp"

namespace leangcn::knn {

// Exact-search call accounting, thread_local like the allocation stats.
// The structural guarantee of pooled sampling (one wide search per block,
// zero per-layer searches) is asserted against these in tests.
struct CallCounters {
  std::uint64_t knn_searches = 0;
  std::uint64_t pool_builds = 0;
};

inline CallCounters& counters() {
  thread_local CallCounters c;
  return c;
}

inline void reset_counters() { counters() = {}; }

// Row i holds the k nearest indices of point i in ascending distance order.
// Entry (i, 0) is always i itself (self-distance 0 wins its tie; see below).
struct NeighborIndex {
  IndexMatrix indices;
  std::int32_t k = 0;

  std::size_t n() const { return indices.rows(); }
};

// Wide neighbor table shared by every layer of a block. width = k+(layers-1)*p
// columns (capped at the point count), ascending distance like NeighborIndex.
struct NeighborPool {
  IndexMatrix indices;
  std::int32_t k = 0;
  std::int32_t p = 0;
  std::int32_t layers = 0;
  std::int32_t width = 0;

  std::size_t n() const { return indices.rows(); }
};

namespace detail {

// Nearest `width` indices per row of a squared-distance matrix.
//
// Tie policy: sort key is (distance, self-first, ascending index). The
// self-first term makes row i start with i even when a duplicate point with
// a smaller index sits at distance zero; all other ties break to the lower
// index.
inline IndexMatrix select_nearest(const Matrix& dist, std::int32_t width) {
  const std::size_t n = dist.rows();
  IndexMatrix out(n, static_cast<std::size_t>(width));
  std::vector<std::int32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const auto drow = dist.row(i);
    const auto self = static_cast<std::int32_t>(i);
    auto rank = [self](std::int32_t x) { return x == self ? -1 : x; };
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<std::ptrdiff_t>(width),
                      order.end(),
                      [&](std::int32_t a, std::int32_t b) {
                        const double da = drow[static_cast<std::size_t>(a)];
                        const double db = drow[static_cast<std::size_t>(b)];
                        if (da != db) return da < db;
                        return rank(a) < rank(b);
                      });
    for (std::int32_t c = 0; c < width; ++c)
      out(i, static_cast<std::size_t>(c)) = order[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace detail

inline NeighborIndex knn_search(const Matrix& features, std::int32_t k) {
  require(k >= 1, "knn_search: k must be at least 1");
  require(static_cast<std::size_t>(k) <= features.rows(),
          "knn_search: k exceeds point count");
  ++counters().knn_searches;
  const Matrix dist = geom::pairwise_sq_distances(features);
  return {detail::select_nearest(dist, k), k};
}

inline NeighborPool build_pool(const Matrix& features, std::int32_t k,
                               std::int32_t p, std::int32_t layers) {
  require(k >= 1, "build_pool: k must be at least 1");
  require(p >= 0, "build_pool: p must be non-negative");
  require(layers >= 1, "build_pool: layers must be at least 1");
  const auto n = static_cast<std::int32_t>(features.rows());
  require(k <= n, "build_pool: k exceeds point count");
  const std::int32_t width = std::min(k + (layers - 1) * p, n);
  ++counters().pool_builds;
  const Matrix dist = geom::pairwise_sq_distances(features);
  return {detail::select_nearest(dist, width), k, p, layers, width};
}

// Sampling policy knobs. Defaults are the documented behavior: distinct
// positions, self kept only if the draw happens to keep it.
struct SampleOptions {
  bool with_replacement = false;
  bool force_self = false;  // pin pool column 0 (the point itself) in place
};

// Draw a k-neighborhood for every point from the first k+(layer-1)*p pool
// columns (window clamped to the pool width). Layer 1 is the exact k nearest,
// taken verbatim. Deeper layers sample k positions per point with a stream
// keyed by (seed, point, layer), so the result is a pure function of
// (pool, layer, seed, options) and rows can be recomputed independently.
// Selected positions are emitted in ascending order, which is ascending
// distance (duplicates possible only with replacement).
inline NeighborIndex sample_neighbors(const NeighborPool& pool,
                                      std::int32_t layer, std::uint64_t seed,
                                      const SampleOptions& opt = {}) {
  require(layer >= 1 && layer <= pool.layers,
          "sample_neighbors: layer out of range");
  const std::size_t n = pool.n();
  const auto k = pool.k;
  NeighborIndex out{IndexMatrix(n, static_cast<std::size_t>(k)), k};
  if (layer == 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::int32_t c = 0; c < k; ++c)
        out.indices(i, static_cast<std::size_t>(c)) =
            pool.indices(i, static_cast<std::size_t>(c));
    return out;
  }
  const std::int32_t window =
      std::min(k + (layer - 1) * pool.p, pool.width);
  const std::int32_t draws = opt.force_self ? k - 1 : k;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i, static_cast<std::uint64_t>(layer));
    std::vector<std::int32_t> positions;
    if (opt.with_replacement) {
      positions.reserve(static_cast<std::size_t>(draws));
      for (std::int32_t c = 0; c < draws; ++c) {
        auto pos = static_cast<std::int32_t>(
            rng.next_below(static_cast<std::uint64_t>(
                opt.force_self ? window - 1 : window)));
        if (opt.force_self) ++pos;  // skip column 0, it is pinned
        positions.push_back(pos);
      }
    } else if (opt.force_self) {
      positions = sample_without_replacement(rng, window - 1, draws);
      for (auto& pos : positions) ++pos;
    } else {
      positions = sample_without_replacement(rng, window, k);
    }
    if (opt.force_self) positions.push_back(0);
    std::sort(positions.begin(), positions.end());
    for (std::int32_t c = 0; c < k; ++c)
      out.indices(i, static_cast<std::size_t>(c)) =
          pool.indices(i, static_cast<std::size_t>(positions[static_cast<std::size_t>(c)]));
  }
  return out;
}

}  // namespace leangcn::knn
