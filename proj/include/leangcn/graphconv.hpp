#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "leangcn/common.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"

namespace leangcn::conv {

enum class Aggregation { sum, max };

// Parameters of one edge-convolution layer: theta acts on the local part
// x_k - x_i, phi on the center x_i, bias is added once per output row after
// aggregation. psi = phi - theta is derived up front; the rearranged kernel
// consumes it directly.
class ConvParams {
 public:
  ConvParams(Matrix theta, Matrix phi)
      : ConvParams(std::move(theta), std::move(phi), Matrix()) {}

  ConvParams(Matrix theta, Matrix phi, Matrix bias)
      : theta_(std::move(theta)), phi_(std::move(phi)), bias_(std::move(bias)) {
    require(theta_.rows() > 0 && theta_.cols() > 0,
            "ConvParams: empty parameter matrix");
    require(theta_.same_shape(phi_), "ConvParams: theta/phi shape mismatch");
    if (bias_.empty()) bias_ = Matrix(1, theta_.cols(), 0.0);
    require(bias_.rows() == 1 && bias_.cols() == theta_.cols(),
            "ConvParams: bias must be 1 x out_dim");
    psi_ = Matrix(theta_.rows(), theta_.cols());
    for (std::size_t l = 0; l < theta_.rows(); ++l)
      for (std::size_t m = 0; m < theta_.cols(); ++m)
        psi_(l, m) = phi_(l, m) - theta_(l, m);
  }

  const Matrix& theta() const { return theta_; }
  const Matrix& phi() const { return phi_; }
  const Matrix& psi() const { return psi_; }
  const Matrix& bias() const { return bias_; }
  std::size_t in_dim() const { return theta_.rows(); }
  std::size_t out_dim() const { return theta_.cols(); }

 private:
  Matrix theta_, phi_, psi_, bias_;
};

namespace detail {

inline void check_features(const Matrix& features,
                           const knn::NeighborIndex& nbrs) {
  require(features.rows() == nbrs.n(), "conv: feature/neighbor row mismatch");
  require(nbrs.k >= 1, "conv: neighborhood size must be at least 1");
  for (std::size_t i = 0; i < nbrs.n(); ++i)
    for (std::int32_t c = 0; c < nbrs.k; ++c) {
      const auto j = nbrs.indices(i, static_cast<std::size_t>(c));
      require(j >= 0 && static_cast<std::size_t>(j) < features.rows(),
              "conv: neighbor index out of range");
    }
}

}  // namespace detail

// Dense edge-feature block: row i holds K slots of [x_k - x_i, x_i],
// 2d scalars each, in neighbor-rank order.
struct EdgeFeatureTensor {
  Matrix data;  // N x (K * 2d)
  std::size_t k = 0;
  std::size_t d = 0;

  std::span<const double> slot(std::size_t i, std::size_t rank) const {
    return data.row(i).subspan(rank * 2 * d, 2 * d);
  }
  std::span<double> slot(std::size_t i, std::size_t rank) {
    return data.row(i).subspan(rank * 2 * d, 2 * d);
  }
};

inline EdgeFeatureTensor gather_edge_features(const Matrix& features,
                                              const knn::NeighborIndex& nbrs) {
  detail::check_features(features, nbrs);
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const auto k = static_cast<std::size_t>(nbrs.k);
  EdgeFeatureTensor t{Matrix(n, k * 2 * d), k, d};
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = features.row(i);
    for (std::size_t r = 0; r < k; ++r) {
      const auto xk =
          features.row(static_cast<std::size_t>(nbrs.indices(i, r)));
      auto slot = t.slot(i, r);
      for (std::size_t l = 0; l < d; ++l) {
        slot[l] = xk[l] - xi[l];
        slot[d + l] = xi[l];
      }
    }
  }
  return t;
}

// out(i, m) = max over neighbor ranks of u(nbr(i, r), m); ties keep the
// lowest rank. Optionally records the winning rank per (i, m).
inline Matrix neighbor_max(const Matrix& u, const knn::NeighborIndex& nbrs,
                           IndexMatrix* arg_rank = nullptr) {
  detail::check_features(u, nbrs);
  const std::size_t n = u.rows();
  const std::size_t m = u.cols();
  Matrix out(n, m, -std::numeric_limits<double>::infinity());
  if (arg_rank) *arg_rank = IndexMatrix(n, m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::int32_t r = 0; r < nbrs.k; ++r) {
      const auto urow =
          u.row(static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
      for (std::size_t c = 0; c < m; ++c) {
        if (urow[c] > orow[c]) {
          orow[c] = urow[c];
          if (arg_rank) (*arg_rank)(i, c) = r;
        }
      }
    }
  }
  return out;
}

inline Matrix neighbor_sum(const Matrix& u, const knn::NeighborIndex& nbrs) {
  detail::check_features(u, nbrs);
  const std::size_t n = u.rows();
  const std::size_t m = u.cols();
  Matrix out(n, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::int32_t r = 0; r < nbrs.k; ++r) {
      const auto urow =
          u.row(static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
      for (std::size_t c = 0; c < m; ++c) orow[c] += urow[c];
    }
  }
  return out;
}

// Definition-order kernel: materialize edge features, run the shared 2d -> M
// map on every edge, aggregate, then bias. d*M*K*N multiplications for the
// local half plus the same again for the center half.
inline Matrix edgeconv_baseline(const Matrix& features,
                                const knn::NeighborIndex& nbrs,
                                const ConvParams& params, Aggregation agg) {
  require(features.cols() == params.in_dim(),
          "edgeconv_baseline: feature dim does not match parameter rows");
  const EdgeFeatureTensor edges = gather_edge_features(features, nbrs);
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const std::size_t m = params.out_dim();
  const auto& theta = params.theta();
  const auto& phi = params.phi();
  const double init = agg == Aggregation::max
                          ? -std::numeric_limits<double>::infinity()
                          : 0.0;
  Matrix out(n, m, init);
  Matrix resp(1, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::size_t r = 0; r < edges.k; ++r) {
      const auto e = edges.slot(i, r);
      resp.fill(0.0);
      auto rr = resp.row(0);
      for (std::size_t l = 0; l < d; ++l) {
        const double local = e[l];
        const double center = e[d + l];
        const auto trow = theta.row(l);
        const auto prow = phi.row(l);
        for (std::size_t c = 0; c < m; ++c)
          rr[c] += local * trow[c] + center * prow[c];
      }
      if (agg == Aggregation::max) {
        for (std::size_t c = 0; c < m; ++c)
          if (rr[c] > orow[c]) orow[c] = rr[c];
      } else {
        for (std::size_t c = 0; c < m; ++c) orow[c] += rr[c];
      }
    }
    const auto b = params.bias().row(0);
    for (std::size_t c = 0; c < m; ++c) orow[c] += b[c];
  }
  return out;
}

// Rearranged kernel, algebraically identical to edgeconv_baseline:
//   max:  max_k <theta_m, x_k>      + <psi_m, x_i> + b_m
//   sum:  sum_k <theta_m, x_k>  + K * <psi_m, x_i> + b_m
// Two shared N x M projections (U = X theta, V = X psi) replace the per-edge
// map, 2*d*M*N multiplications total, and no N x K x 2d tensor is ever
// materialized: peak transient footprint stays O(N * max(M, d) + N * K).
inline Matrix edgeconv_shuffled(const Matrix& features,
                                const knn::NeighborIndex& nbrs,
                                const ConvParams& params,
                                Aggregation agg = Aggregation::max) {
  detail::check_features(features, nbrs);
  require(features.cols() == params.in_dim(),
          "edgeconv_shuffled: feature dim does not match parameter rows");
  const std::size_t n = features.rows();
  const std::size_t m = params.out_dim();
  const Matrix u = matmul(features, params.theta());
  const Matrix v = matmul(features, params.psi());
  Matrix out = agg == Aggregation::max ? neighbor_max(u, nbrs)
                                       : neighbor_sum(u, nbrs);
  const auto b = params.bias().row(0);
  const double center_scale =
      agg == Aggregation::sum ? static_cast<double>(nbrs.k) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto vrow = v.row(i);
    auto orow = out.row(i);
    for (std::size_t c = 0; c < m; ++c)
      orow[c] += center_scale * vrow[c] + b[c];
  }
  return out;
}

// Linear neighborhood convolution: out(i, m) = sum_k <theta_m, x_{n_ik}>,
// the shared-parameter sum kernel. Direct per-edge evaluation.
inline Matrix sum_conv(const Matrix& features, const knn::NeighborIndex& nbrs,
                       const Matrix& theta) {
  detail::check_features(features, nbrs);
  require(features.cols() == theta.rows(),
          "sum_conv: feature dim does not match parameter rows");
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  const std::size_t m = theta.cols();
  Matrix out(n, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::int32_t r = 0; r < nbrs.k; ++r) {
      const auto xk = features.row(
          static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
      for (std::size_t l = 0; l < d; ++l) {
        const double xv = xk[l];
        const auto trow = theta.row(l);
        for (std::size_t c = 0; c < m; ++c) orow[c] += xv * trow[c];
      }
    }
  }
  return out;
}

// Fully general form: each neighbor rank r has its own d x M parameter
// matrix, summed over the neighborhood. Subsumes sum_conv when every slot
// shares one matrix.
inline Matrix generic_graph_conv(const Matrix& features,
                                 const knn::NeighborIndex& nbrs,
                                 std::span<const Matrix> slot_params) {
  detail::check_features(features, nbrs);
  require(slot_params.size() == static_cast<std::size_t>(nbrs.k),
          "generic_graph_conv: need one parameter matrix per neighbor rank");
  const std::size_t d = features.cols();
  for (const auto& p : slot_params)
    require(p.rows() == d && p.cols() == slot_params.front().cols(),
            "generic_graph_conv: slot parameter shape mismatch");
  const std::size_t n = features.rows();
  const std::size_t m = slot_params.front().cols();
  Matrix out(n, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto orow = out.row(i);
    for (std::int32_t r = 0; r < nbrs.k; ++r) {
      const auto xk = features.row(
          static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
      const auto& theta = slot_params[static_cast<std::size_t>(r)];
      for (std::size_t l = 0; l < d; ++l) {
        const double xv = xk[l];
        const auto trow = theta.row(l);
        for (std::size_t c = 0; c < m; ++c) orow[c] += xv * trow[c];
      }
    }
  }
  return out;
}

inline Matrix leaky_relu(const Matrix& x, double slope = 0.2) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.flat()[i];
    out.flat()[i] = v > 0.0 ? v : slope * v;
  }
  return out;
}

}  // namespace leangcn::conv
