#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "leangcn/common.hpp"
#include "leangcn/cost.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/network.hpp"
#include "leangcn/rng.hpp"

namespace leangcn::bench {

// Median wall-clock of `reps` timed calls after `warmup` untimed ones.
// Measurement protocol: median, not mean, so one scheduler hiccup cannot
// move the result; at least 3 repetitions required.
template <typename F>
double median_time_ms(F&& fn, int warmup, int reps) {
  require(reps >= 3, "median_time_ms: need at least 3 repetitions");
  require(warmup >= 0, "median_time_ms: warmup must be non-negative");
  for (int w = 0; w < warmup; ++w) fn();
  std::vector<double> ms(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms[static_cast<std::size_t>(r)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t mid = ms.size() / 2;
  return ms.size() % 2 == 1 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
}

struct BenchRow {
  std::uint64_t points = 0;
  std::string mode;
  double median_ms = 0.0;
  std::uint64_t mults = 0;
  std::uint64_t knn_mults = 0;
  std::uint64_t modeled_bytes = 0;
};

// Integer-rounded receptive-field growth sweep {k/4, k/2, 3k/4, k}.
inline std::vector<std::int32_t> p_sweep_values(std::int32_t k) {
  require(k >= 1, "p_sweep_values: k must be positive");
  std::vector<std::int32_t> out;
  for (int num = 1; num <= 4; ++num) {
    auto p = static_cast<std::int32_t>(
        std::llround(static_cast<double>(num) * k / 4.0));
    if (out.empty() || out.back() != p) out.push_back(p);
  }
  return out;
}

inline Matrix random_cloud(std::size_t n, std::size_t d, std::uint64_t seed) {
  Matrix cloud(n, d);
  CounterRng rng(seed);
  for (std::size_t e = 0; e < cloud.size(); ++e)
    cloud.flat()[e] = rng.next_normal();
  return cloud;
}

// Forward-pass timing across point counts. Always times the baseline; adds
// the spec's own mode when it differs. Modeled columns come from the
// analytic cost report at the same N.
inline std::vector<BenchRow> run_bench(const net::NetworkSpec& spec,
                                       std::span<const std::uint64_t> sizes,
                                       int warmup, int reps,
                                       std::uint64_t seed) {
  require(!sizes.empty(), "run_bench: need at least one point count");
  spec.validate();
  std::vector<net::Mode> modes{net::Mode::baseline};
  if (spec.mode != net::Mode::baseline) modes.push_back(spec.mode);

  std::vector<BenchRow> rows;
  for (const std::uint64_t n : sizes) {
    const Matrix cloud =
        random_cloud(static_cast<std::size_t>(n),
                     static_cast<std::size_t>(spec.input_dim),
                     derive_seed(seed, n));
    for (const auto mode : modes) {
      net::NetworkSpec ms = spec;
      ms.mode = mode;
      const net::Params params = net::init_params(ms, spec.seed, 0.1);
      const auto mc = cost::mode_cost(ms, n, mode);
      BenchRow row;
      row.points = n;
      row.mode = net::mode_name(mode);
      row.mults = mc.total_mults;
      row.knn_mults = mc.knn_mults;
      row.modeled_bytes = mc.peak_act_bytes();
      row.median_ms = median_time_ms(
          [&] { net::forward(ms, params, cloud, derive_seed(seed, n, 7)); },
          warmup, reps);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace leangcn::bench
