#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "leangcn/common.hpp"
#include "leangcn/geometry.hpp"
#include "leangcn/graphconv.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/network.hpp"
#include "leangcn/rng.hpp"

namespace leangcn::verify {

// ============================================================================
// expectation bounds for the shared-parameter conv
// ============================================================================

struct BoundReport {
  std::size_t i = 0;
  std::size_t j = 0;
  double d_n = 0.0;       // alignment-sum neighborhood distance
  double d_nc = 0.0;      // centroid distance
  double lower = 0.0;     // sigma^2 K^2 d_nc
  double upper = 0.0;     // sigma^2 d K M d_n
  double mc_mean = 0.0;
  double mc_se = 0.0;
  std::uint64_t samples = 0;
  bool pass = false;
};

// Monte-Carlo check that E ||x'_i - x'_j||^2 under theta entries drawn
// Normal(0, sigma^2) lies inside [lower - 3 se, upper + 3 se]. The conv
// output row for point i is sum_r <theta_m, x^r>, which by linearity equals
// the projection of the summed neighborhood vector; per-draw streams are
// keyed (seed, draw) so draws are order-independent.
inline BoundReport check_distance_bounds(const Matrix& features, std::size_t i,
                                  std::size_t j, std::int32_t k,
                                  std::int32_t m, double sigma,
                                  std::uint64_t samples, std::uint64_t seed) {
  require(i < features.rows() && j < features.rows(),
          "check_distance_bounds: point index out of range");
  require(sigma > 0.0, "check_distance_bounds: sigma must be positive");
  require(samples >= 1000, "check_distance_bounds: need at least 1000 draws");
  require(m >= 1, "check_distance_bounds: output width must be positive");

  const auto nbrs = knn::knn_search(features, k);
  const auto ni = nbrs.indices.row(i);
  const auto nj = nbrs.indices.row(j);

  BoundReport rep;
  rep.i = i;
  rep.j = j;
  rep.samples = samples;
  rep.d_n = geom::neighborhood_distance(features, ni, nj);
  rep.d_nc = geom::neighborhood_centroid_distance(features, ni, nj);
  const double s2 = sigma * sigma;
  const double kk = static_cast<double>(k);
  rep.lower = s2 * kk * kk * rep.d_nc;
  rep.upper = s2 * features.cols() * kk * static_cast<double>(m) * rep.d_n;
  if (rep.lower > rep.upper)
    throw std::logic_error("check_distance_bounds: bound ordering violated");

  // delta = summed neighborhood of i minus summed neighborhood of j.
  const std::size_t d = features.cols();
  std::vector<double> delta(d, 0.0);
  for (std::int32_t r = 0; r < k; ++r) {
    const auto xa = features.row(static_cast<std::size_t>(ni[static_cast<std::size_t>(r)]));
    const auto xb = features.row(static_cast<std::size_t>(nj[static_cast<std::size_t>(r)]));
    for (std::size_t l = 0; l < d; ++l) delta[l] += xa[l] - xb[l];
  }

  std::vector<double> vals(samples);
  std::vector<double> y(static_cast<std::size_t>(m));
  for (std::uint64_t s = 0; s < samples; ++s) {
    CounterRng rng(seed, s);
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t l = 0; l < d; ++l) {
      const double dl = delta[l];
      for (std::size_t c = 0; c < y.size(); ++c)
        y[c] += dl * (sigma * rng.next_normal());
    }
    double acc = 0.0;
    for (double v : y) acc += v * v;
    vals[s] = acc;
  }
  rep.mc_mean = pairwise_sum(vals) / static_cast<double>(samples);
  if (samples > 1) {
    std::vector<double> sq(samples);
    for (std::uint64_t s = 0; s < samples; ++s) {
      const double dv = vals[s] - rep.mc_mean;
      sq[s] = dv * dv;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(samples - 1);
    rep.mc_se = std::sqrt(var / static_cast<double>(samples));
  }
  rep.pass = rep.mc_mean >= rep.lower - 3.0 * rep.mc_se &&
             rep.mc_mean <= rep.upper + 3.0 * rep.mc_se;
  return rep;
}

// ============================================================================
// rearrangement equivalence sweep
// ============================================================================

struct EquivalenceReport {
  std::uint64_t trials = 0;
  double max_rel_diff_max_agg = 0.0;
  double max_rel_diff_sum_agg = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct EquivalenceCaps {
  std::int32_t max_n = 256;
  std::int32_t max_d = 16;
  std::int32_t max_m = 32;
  std::int32_t max_k = 20;
};

// Random-instance sweep of definition-order vs rearranged edge conv, both
// aggregations, including psi = 0 degenerate trials (every fifth). Exact
// property: a single entry beyond tolerance fails.
inline EquivalenceReport check_rearrangement(std::uint64_t trials,
                                        const EquivalenceCaps& caps,
                                        double tolerance, std::uint64_t seed) {
  require(trials >= 1, "check_rearrangement: need at least one trial");
  require(caps.max_n >= 4 && caps.max_d >= 1 && caps.max_m >= 1 &&
              caps.max_k >= 1,
          "check_rearrangement: caps too small");
  EquivalenceReport rep;
  rep.trials = trials;
  rep.tolerance = tolerance;
  for (std::uint64_t t = 0; t < trials; ++t) {
    CounterRng rng(seed, t);
    const auto n = static_cast<std::size_t>(
        4 + rng.next_below(static_cast<std::uint64_t>(caps.max_n - 3)));
    const auto d = static_cast<std::size_t>(
        1 + rng.next_below(static_cast<std::uint64_t>(caps.max_d)));
    const auto m = static_cast<std::size_t>(
        1 + rng.next_below(static_cast<std::uint64_t>(caps.max_m)));
    const auto kcap = std::min<std::uint64_t>(
        static_cast<std::uint64_t>(caps.max_k), n);
    const auto k = static_cast<std::int32_t>(1 + rng.next_below(kcap));

    Matrix features(n, d);
    for (std::size_t e = 0; e < features.size(); ++e)
      features.flat()[e] = rng.next_normal();
    Matrix theta(d, m), phi(d, m), bias(1, m);
    for (std::size_t e = 0; e < theta.size(); ++e)
      theta.flat()[e] = 0.5 * rng.next_normal();
    if (t % 5 == 2) {
      phi = theta;  // psi = 0 degenerate trial
    } else {
      for (std::size_t e = 0; e < phi.size(); ++e)
        phi.flat()[e] = 0.5 * rng.next_normal();
    }
    for (std::size_t e = 0; e < bias.size(); ++e)
      bias.flat()[e] = 0.5 * rng.next_normal();

    const auto nbrs = knn::knn_search(features, k);
    const conv::ConvParams params(std::move(theta), std::move(phi),
                                  std::move(bias));
    for (auto agg : {conv::Aggregation::max, conv::Aggregation::sum}) {
      const Matrix base = conv::edgeconv_baseline(features, nbrs, params, agg);
      const Matrix shuf = conv::edgeconv_shuffled(features, nbrs, params, agg);
      double& slot = agg == conv::Aggregation::max ? rep.max_rel_diff_max_agg
                                                   : rep.max_rel_diff_sum_agg;
      for (std::size_t e = 0; e < base.size(); ++e)
        slot = std::max(slot, rel_diff(base.flat()[e], shuf.flat()[e]));
    }
  }
  rep.pass = rep.max_rel_diff_max_agg < tolerance &&
             rep.max_rel_diff_sum_agg < tolerance;
  return rep;
}

// ============================================================================
// weight distribution
// ============================================================================

struct WeightStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double variance = 0.0;          // population
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> bin_edges;  // bins + 1 entries
  std::vector<std::uint64_t> bin_counts;
};

// Descriptive moments and histogram; no pass verdict. Degenerate constant
// input reports zero variance and puts every entry in the first bin.
inline WeightStats weight_stats(std::span<const double> values,
                                std::size_t bins = 32) {
  require(!values.empty(), "weight_stats: empty input");
  require(bins >= 1, "weight_stats: need at least one bin");
  WeightStats ws;
  ws.count = values.size();
  ws.min = values[0];
  ws.max = values[0];
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    ws.min = std::min(ws.min, v);
    ws.max = std::max(ws.max, v);
  }
  ws.mean = sum / static_cast<double>(ws.count);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double dv = v - ws.mean;
    const double dv2 = dv * dv;
    m2 += dv2;
    m3 += dv2 * dv;
    m4 += dv2 * dv2;
  }
  const auto n = static_cast<double>(ws.count);
  ws.variance = m2 / n;
  if (ws.variance > 0.0) {
    const double sd = std::sqrt(ws.variance);
    ws.skewness = (m3 / n) / (sd * sd * sd);
    ws.excess_kurtosis = (m4 / n) / (ws.variance * ws.variance) - 3.0;
  }
  ws.bin_edges.resize(bins + 1);
  ws.bin_counts.assign(bins, 0);
  const double lo = ws.min;
  const double span = ws.max - ws.min;
  for (std::size_t b = 0; b <= bins; ++b)
    ws.bin_edges[b] = lo + span * static_cast<double>(b) / static_cast<double>(bins);
  for (double v : values) {
    std::size_t b = 0;
    if (span > 0.0) {
      b = static_cast<std::size_t>((v - lo) / span * static_cast<double>(bins));
      if (b >= bins) b = bins - 1;  // v == max lands in the last bin
    }
    ++ws.bin_counts[b];
  }
  return ws;
}

inline WeightStats weight_stats(const net::Params& params,
                                std::size_t bins = 32) {
  std::vector<double> values;
  for (const auto& [name, mat] : params.named()) {
    (void)name;
    values.insert(values.end(), mat->flat().begin(), mat->flat().end());
  }
  return weight_stats(values, bins);
}

// ============================================================================
// feature-space distance map
// ============================================================================

// Squared distance from the anchor's layer-`layer` feature to every point's,
// layer 0 meaning the raw input. Output aligns with point indices.
inline std::vector<double> feature_distance_map(const net::NetworkSpec& spec,
                                                const net::Params& params,
                                                const Matrix& cloud,
                                                std::size_t layer,
                                                std::size_t anchor,
                                                std::uint64_t sampling_seed = 0) {
  require(anchor < cloud.rows(), "feature_distance_map: anchor out of range");
  const Matrix* features = &cloud;
  net::ForwardTrace trace;
  if (layer > 0) {
    net::forward(spec, params, cloud, sampling_seed, &trace);
    require(layer <= trace.conv_features.size(),
            "feature_distance_map: layer exceeds network depth");
    features = &trace.conv_features[layer - 1];
  }
  std::vector<double> out(cloud.rows());
  for (std::size_t p = 0; p < cloud.rows(); ++p)
    out[p] = geom::sq_distance_rows(*features, anchor, p);
  return out;
}

}  // namespace leangcn::verify
