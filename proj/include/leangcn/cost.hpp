#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "leangcn/common.hpp"
#include "leangcn/netspec.hpp"

namespace leangcn::cost {

// Counting convention: multiplications inside the d-dimensional linear maps
// only. Additions, comparisons, per-row bias adds, and scalar rescales are
// excluded. All counts are exact integers; dimensions are capped so every
// count and every ratio numerator/denominator is exactly representable in a
// double, making the documented ratio identities hold bitwise.

inline constexpr std::uint64_t kMaxPoints = 1u << 20;
inline constexpr std::uint64_t kMaxDim = 1u << 10;

namespace detail {
inline void check_caps(std::uint64_t n, std::uint64_t d, std::uint64_t k,
                       std::uint64_t m) {
  require(n >= 1 && n <= kMaxPoints, "cost: point count out of range");
  require(d >= 1 && d <= kMaxDim, "cost: feature dim out of range");
  require(k >= 1 && k <= kMaxDim, "cost: neighborhood size out of range");
  require(m >= 1 && m <= kMaxDim, "cost: output dim out of range");
}
}  // namespace detail

// Exact neighbor search over N points in d dims: d*N^2 multiplications.
inline std::uint64_t knn_cost(std::uint64_t n, std::uint64_t d) {
  detail::check_caps(n, d, 1, 1);
  return d * n * n;
}

enum class ConvRoute { direct, rearranged };

// Shared-parameter neighborhood convolution, d -> M over K neighbors of N
// points: d*M*K*N direct, 2*d*M*N after operation rearrangement (one shared
// point projection plus one center projection).
inline std::uint64_t conv_cost(std::uint64_t n, std::uint64_t d,
                               std::uint64_t k, std::uint64_t m,
                               ConvRoute route) {
  detail::check_caps(n, d, k, m);
  return route == ConvRoute::direct ? d * m * k * n : 2 * d * m * n;
}

// Search-to-convolution cost ratio N / (K*M); equals
// knn_cost / conv_cost(direct) exactly.
inline double gamma(std::uint64_t n, std::uint64_t k, std::uint64_t m) {
  detail::check_caps(n, 1, k, m);
  return static_cast<double>(n) / static_cast<double>(k * m);
}

enum class StageKind { knn, pool, sample, conv, head };

struct StageCost {
  std::string name;
  StageKind kind = StageKind::conv;
  std::uint64_t mults = 0;
  // Scalars the stage materializes (outputs plus transients), element count.
  std::uint64_t act_scalars = 0;
};

struct ModeCost {
  net::Mode mode = net::Mode::baseline;
  std::vector<StageCost> stages;
  std::uint64_t total_mults = 0;
  std::uint64_t knn_mults = 0;  // knn + pool stages
  // Peak live activation estimate: max over stages of stage scalars plus the
  // feature matrix the stage reads.
  std::uint64_t peak_act_scalars = 0;

  std::uint64_t peak_act_bytes() const { return peak_act_scalars * 8; }
};

struct CostReport {
  std::uint64_t points = 0;
  ModeCost baseline;
  ModeCost chosen;  // the spec's mode as given

  double mult_ratio() const {
    return static_cast<double>(chosen.total_mults) /
           static_cast<double>(baseline.total_mults);
  }
  double activation_ratio() const {
    return static_cast<double>(chosen.peak_act_scalars) /
           static_cast<double>(baseline.peak_act_scalars);
  }
};

namespace detail {
inline std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }
}  // namespace detail

// Walks the stage schedule the forward pass executes for this mode, charging
// each stage. Static (coordinate-basis) searches and pools are charged once
// per distinct configuration, mirroring the forward pass cache.
inline ModeCost mode_cost(const net::NetworkSpec& spec, std::uint64_t n,
                          net::Mode mode) {
  using detail::u64;
  spec.validate();
  const auto d0 = u64(spec.input_dim);
  ModeCost mc;
  mc.mode = mode;
  const bool pooled =
      mode == net::Mode::accelerated || mode == net::Mode::accel_s1;
  const bool rearranged =
      mode == net::Mode::accelerated || mode == net::Mode::accel_s2;

  std::map<std::uint64_t, bool> static_search_done;          // key: k
  std::map<std::pair<std::uint64_t, std::uint64_t>, bool> static_pool_done;

  auto push = [&](StageCost s, std::uint64_t live_inputs) {
    mc.total_mults += s.mults;
    if (s.kind == StageKind::knn || s.kind == StageKind::pool)
      mc.knn_mults += s.mults;
    const std::uint64_t candidate = s.act_scalars + live_inputs;
    if (candidate > mc.peak_act_scalars) mc.peak_act_scalars = candidate;
    mc.stages.push_back(std::move(s));
  };

  std::uint64_t d = d0;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    const auto k = u64(blk.k);
    const auto layers = u64(blk.layers);
    const std::uint64_t width =
        std::min(k + (layers - 1) * u64(blk.p), n);
    const std::uint64_t d_block = d;
    const std::string tag = "b" + std::to_string(b + 1);

    if (pooled) {
      const std::uint64_t basis_dim = blk.dynamic ? d_block : d0;
      const auto key = std::make_pair(k, width);
      if (blk.dynamic || !static_pool_done[key]) {
        static_pool_done[key] = true;
        push({tag + ".pool", StageKind::pool, knn_cost(n, basis_dim),
              n * n + n * width},
             n * basis_dim);
      }
    }
    for (std::size_t l = 0; l < blk.widths.size(); ++l) {
      const auto m = u64(blk.widths[l]);
      const std::string ltag = tag + ".l" + std::to_string(l + 1);
      if (pooled) {
        push({ltag + ".sample", StageKind::sample, 0, n * k}, n * d);
      } else {
        const std::uint64_t basis_dim = blk.dynamic ? d : d0;
        if (blk.dynamic || !static_search_done[k]) {
          static_search_done[k] = true;
          push({ltag + ".knn", StageKind::knn, knn_cost(n, basis_dim),
                n * n + n * k},
               n * basis_dim);
        }
      }
      if (rearranged) {
        // Shared projection N x M plus per-center projection, no edge tensor.
        push({ltag + ".conv", StageKind::conv, 2 * d * m * n, 2 * n * m},
             n * d);
      } else {
        // Edge tensor N*K*2d plus per-edge 2d -> M map.
        push({ltag + ".conv", StageKind::conv, 2 * d * m * k * n,
              n * k * 2 * d + n * m},
             n * d);
      }
      d = m;
    }
  }

  // Pointwise head on the pooled descriptor.
  std::uint64_t hd = d;
  std::uint64_t head_mults = 0;
  std::uint64_t head_act = d;  // pooled vector
  for (auto h : spec.head.hidden) {
    head_mults += hd * u64(h);
    head_act += u64(h);
    hd = u64(h);
  }
  head_mults += hd * u64(spec.head.classes);
  head_act += u64(spec.head.classes);
  push({"head", StageKind::head, head_mults, head_act}, n * d);
  return mc;
}

inline CostReport network_cost(const net::NetworkSpec& spec, std::uint64_t n) {
  require(n >= 1 && n <= kMaxPoints, "network_cost: point count out of range");
  CostReport r;
  r.points = n;
  r.baseline = mode_cost(spec, n, net::Mode::baseline);
  r.chosen = mode_cost(spec, n, spec.mode);
  return r;
}

}  // namespace leangcn::cost
