#pragma once

#include <cstdint>
#include <span>

#include "leangcn/common.hpp"
#include "leangcn/matrix.hpp"

namespace leangcn::geom {

inline double sq_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sq_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double diff = a[l] - b[l];
    acc += diff * diff;
  }
  return acc;
}

inline double sq_distance_rows(const Matrix& m, std::size_t i, std::size_t j) {
  return sq_distance(m.row(i), m.row(j));
}

// Full N x N squared-distance matrix, direct differences per pair. Exact
// zeros on the diagonal and for duplicate points; never negative.
inline Matrix pairwise_sq_distances(const Matrix& pts) {
  require(pts.rows() > 0 && pts.cols() > 0, "pairwise_sq_distances: empty input");
  require(all_finite(pts), "pairwise_sq_distances: non-finite coordinate");
  const std::size_t n = pts.rows();
  Matrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = pts.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = sq_distance(ri, pts.row(j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

// Expanded form ||x||^2 + ||y||^2 - 2<x,y>, clamped at zero. Roughly d mults
// per pair instead of d mults + 2d adds, at the price of cancellation noise;
// used only where throughput is measured, never inside verification paths.
inline Matrix pairwise_sq_distances_fast(const Matrix& pts) {
  require(pts.rows() > 0 && pts.cols() > 0,
          "pairwise_sq_distances_fast: empty input");
  require(all_finite(pts), "pairwise_sq_distances_fast: non-finite coordinate");
  const std::size_t n = pts.rows();
  const std::size_t d = pts.cols();
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = pts.row(i);
    double acc = 0.0;
    for (std::size_t l = 0; l < d; ++l) acc += r[l] * r[l];
    norms[i] = acc;
  }
  Matrix out(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = pts.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto rj = pts.row(j);
      double dot = 0.0;
      for (std::size_t l = 0; l < d; ++l) dot += ri[l] * rj[l];
      double v = norms[i] + norms[j] - 2.0 * dot;
      if (v < 0.0) v = 0.0;
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// Alignment-sum distance between two equal-size neighborhoods: the rank-r
// member of one is paired with the rank-r member of the other.
inline double neighborhood_distance(const Matrix& features,
                                    std::span<const std::int32_t> a,
                                    std::span<const std::int32_t> b) {
  require(!a.empty(), "neighborhood_distance: empty neighborhood");
  require(a.size() == b.size(), "neighborhood_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    acc += sq_distance_rows(features, static_cast<std::size_t>(a[r]),
                            static_cast<std::size_t>(b[r]));
  return acc;
}

// Squared distance between the two neighborhood centroids.
inline double neighborhood_centroid_distance(const Matrix& features,
                                             std::span<const std::int32_t> a,
                                             std::span<const std::int32_t> b) {
  require(!a.empty(), "neighborhood_centroid_distance: empty neighborhood");
  require(a.size() == b.size(), "neighborhood_centroid_distance: size mismatch");
  const std::size_t d = features.cols();
  const double inv_k = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < d; ++l) {
    double ca = 0.0;
    double cb = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
      ca += features(static_cast<std::size_t>(a[r]), l);
      cb += features(static_cast<std::size_t>(b[r]), l);
    }
    const double diff = (ca - cb) * inv_k;
    acc += diff * diff;
  }
  return acc;
}

}  // namespace leangcn::geom
