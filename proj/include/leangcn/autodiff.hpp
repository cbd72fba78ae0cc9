#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "leangcn/common.hpp"
#include "leangcn/graphconv.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"

namespace leangcn::ad {

enum class Op {
  input,
  param,
  matmul,
  add_bias,
  leaky_relu,
  edgeconv,
  global_max_pool,
  softmax_ce,
};

struct Node {
  Op op = Op::input;
  int a = -1, b = -1, c = -1, d = -1;  // operand ids; edgeconv: x, theta, phi, bias
  Matrix value;
  Matrix grad;
  Matrix aux;        // softmax probabilities
  IndexMatrix arg;   // winning rank (edgeconv max) or row (pool) per output
  const knn::NeighborIndex* nbrs = nullptr;  // caller-owned, edgeconv only
  conv::Aggregation agg = conv::Aggregation::max;
  double slope = 0.2;
  int label = -1;
};

// Define-by-run reverse-mode tape. Values are computed eagerly as nodes are
// appended; backward() fills node gradients in reverse order. Neighbor
// structure enters only through the fused edgeconv op and is treated as a
// constant of the expression (no gradient flows through index selection).
class Tape {
 public:
  int input(Matrix v) { return leaf(Op::input, std::move(v)); }
  int param(Matrix v) { return leaf(Op::param, std::move(v)); }

  int matmul(int x, int w) {
    const auto& a = val(x);
    const auto& b = val(w);
    Node n;
    n.op = Op::matmul;
    n.a = x;
    n.b = w;
    n.value = leangcn::matmul(a, b);
    return push(std::move(n));
  }

  // Broadcast a 1 x M bias over every row.
  int add_bias(int x, int bias) {
    const auto& a = val(x);
    const auto& b = val(bias);
    require(b.rows() == 1 && b.cols() == a.cols(), "add_bias: bias must be 1 x cols");
    Node n;
    n.op = Op::add_bias;
    n.a = x;
    n.b = bias;
    n.value = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      auto row = n.value.row(i);
      const auto brow = b.row(0);
      for (std::size_t c = 0; c < a.cols(); ++c) row[c] += brow[c];
    }
    return push(std::move(n));
  }

  int leaky_relu(int x, double slope = 0.2) {
    const auto& a = val(x);
    Node n;
    n.op = Op::leaky_relu;
    n.a = x;
    n.slope = slope;
    n.value = Matrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double v = a.flat()[i];
      n.value.flat()[i] = v > 0.0 ? v : slope * v;
      const double dist = std::fabs(v);
      if (dist < min_kink_margin_) min_kink_margin_ = dist;
    }
    return push(std::move(n));
  }

  // Edge convolution over a fixed neighbor table:
  //   max:  out(i,m) = max_r <theta_m, x_{n_ir}> + <psi_m, x_i> + b_m
  //   sum:  out(i,m) = sum_r <theta_m, x_{n_ir}> + K<psi_m, x_i> + b_m
  // with psi = phi - theta. Ties in the max keep the lowest rank.
  int edgeconv(int x, const knn::NeighborIndex& nbrs, int theta, int phi,
               int bias, conv::Aggregation agg) {
    const auto& xv = val(x);
    const auto& th = val(theta);
    const auto& ph = val(phi);
    const auto& bv = val(bias);
    require(th.same_shape(ph), "edgeconv: theta/phi shape mismatch");
    require(xv.cols() == th.rows(), "edgeconv: feature dim mismatch");
    require(bv.rows() == 1 && bv.cols() == th.cols(), "edgeconv: bias must be 1 x out");
    require(xv.rows() == nbrs.n(), "edgeconv: neighbor table row mismatch");

    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    const std::size_t m = th.cols();
    const auto k = nbrs.k;
    const Matrix u = leangcn::matmul(xv, th);

    Node nd;
    nd.op = Op::edgeconv;
    nd.a = x;
    nd.b = theta;
    nd.c = phi;
    nd.d = bias;
    nd.nbrs = &nbrs;
    nd.agg = agg;
    nd.value = Matrix(n, m);
    if (agg == conv::Aggregation::max) nd.arg = IndexMatrix(n, m, 0);

    for (std::size_t i = 0; i < n; ++i) {
      auto out = nd.value.row(i);
      if (agg == conv::Aggregation::max) {
        std::vector<double> best(m, -std::numeric_limits<double>::infinity());
        std::vector<double> second(m, -std::numeric_limits<double>::infinity());
        for (std::int32_t r = 0; r < k; ++r) {
          const auto urow = u.row(
              static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
          for (std::size_t c = 0; c < m; ++c) {
            const double v = urow[c];
            if (v > best[c]) {
              second[c] = best[c];
              best[c] = v;
              nd.arg(i, c) = r;
            } else if (v > second[c]) {
              second[c] = v;
            }
          }
        }
        for (std::size_t c = 0; c < m; ++c) {
          out[c] = best[c];
          const double margin = best[c] - second[c];
          if (k > 1 && margin < min_max_margin_) min_max_margin_ = margin;
        }
      } else {
        for (std::size_t c = 0; c < m; ++c) out[c] = 0.0;
        for (std::int32_t r = 0; r < k; ++r) {
          const auto urow = u.row(
              static_cast<std::size_t>(nbrs.indices(i, static_cast<std::size_t>(r))));
          for (std::size_t c = 0; c < m; ++c) out[c] += urow[c];
        }
      }
      const double scale =
          agg == conv::Aggregation::sum ? static_cast<double>(k) : 1.0;
      const auto xi = xv.row(i);
      for (std::size_t l = 0; l < d; ++l) {
        const double xl = xi[l];
        for (std::size_t c = 0; c < m; ++c)
          out[c] += scale * xl * (ph(l, c) - th(l, c));
      }
      const auto brow = bv.row(0);
      for (std::size_t c = 0; c < m; ++c) out[c] += brow[c];
    }
    return push(std::move(nd));
  }

  // Column-wise max over all rows; 1 x M output. Ties keep the lowest row.
  int global_max_pool(int x) {
    const auto& a = val(x);
    require(a.rows() >= 1, "global_max_pool: empty input");
    Node n;
    n.op = Op::global_max_pool;
    n.a = x;
    n.value = Matrix(1, a.cols());
    n.arg = IndexMatrix(1, a.cols(), 0);
    for (std::size_t c = 0; c < a.cols(); ++c) {
      double best = a(0, c);
      double second = -std::numeric_limits<double>::infinity();
      std::int32_t arg = 0;
      for (std::size_t i = 1; i < a.rows(); ++i) {
        const double v = a(i, c);
        if (v > best) {
          second = best;
          best = v;
          arg = static_cast<std::int32_t>(i);
        } else if (v > second) {
          second = v;
        }
      }
      n.value(0, c) = best;
      n.arg(0, c) = arg;
      if (a.rows() > 1 && best - second < min_max_margin_)
        min_max_margin_ = best - second;
    }
    return push(std::move(n));
  }

  // Cross-entropy of a single-row logit vector against an integer label.
  int softmax_cross_entropy(int logits, int label) {
    const auto& z = val(logits);
    require(z.rows() == 1, "softmax_cross_entropy: logits must be a single row");
    require(label >= 0 && static_cast<std::size_t>(label) < z.cols(),
            "softmax_cross_entropy: label out of range");
    const auto zr = z.row(0);
    double zmax = zr[0];
    for (double v : zr) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double v : zr) sum += std::exp(v - zmax);
    Node n;
    n.op = Op::softmax_ce;
    n.a = logits;
    n.label = label;
    n.aux = Matrix(1, z.cols());
    for (std::size_t c = 0; c < z.cols(); ++c)
      n.aux(0, c) = std::exp(zr[c] - zmax) / sum;
    n.value = Matrix(1, 1);
    n.value(0, 0) = (zmax + std::log(sum)) - zr[static_cast<std::size_t>(label)];
    return push(std::move(n));
  }

  const Matrix& value(int id) const { return val(id); }
  double value_scalar(int id) const {
    const auto& v = val(id);
    require(v.rows() == 1 && v.cols() == 1, "value_scalar: node is not scalar");
    return v(0, 0);
  }

  // Fill gradients of every ancestor of `loss`, which must be scalar.
  void backward(int loss) {
    if (nodes_.empty()) throw std::logic_error("backward: empty tape");
    check_id(loss);
    require(nodes_[static_cast<std::size_t>(loss)].value.rows() == 1 &&
                nodes_[static_cast<std::size_t>(loss)].value.cols() == 1,
            "backward: loss node must be scalar");
    for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
    nodes_[static_cast<std::size_t>(loss)].grad(0, 0) = 1.0;
    for (int id = loss; id >= 0; --id) back_one(static_cast<std::size_t>(id));
    backward_done_ = true;
  }

  const Matrix& grad(int id) const {
    if (!backward_done_)
      throw std::logic_error("grad: backward has not run on this tape");
    check_id(id);
    return nodes_[static_cast<std::size_t>(id)].grad;
  }

  // Smallest winner-vs-runner-up gap among all max selections on the tape,
  // and smallest |preactivation| seen by any leaky_relu. Both +inf when the
  // respective op never ran with a competitor.
  double min_max_margin() const { return min_max_margin_; }
  double min_kink_margin() const { return min_kink_margin_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  int leaf(Op op, Matrix v) {
    require(!v.empty(), "tape leaf: empty matrix");
    Node n;
    n.op = op;
    n.value = std::move(v);
    return push(std::move(n));
  }

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void check_id(int id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(),
            "tape: node id out of range");
  }

  const Matrix& val(int id) const {
    check_id(id);
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  Matrix& grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  void back_one(std::size_t id) {
    Node& n = nodes_[id];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::input:
      case Op::param:
        break;
      case Op::matmul: {
        const auto& a = val(n.a);
        const auto& b = val(n.b);
        accumulate(grad_ref(n.a), matmul_nt(g, b));
        accumulate(grad_ref(n.b), matmul_tn(a, g));
        break;
      }
      case Op::add_bias: {
        accumulate(grad_ref(n.a), g);
        auto& gb = grad_ref(n.b);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          const auto grow = g.row(i);
          auto brow = gb.row(0);
          for (std::size_t c = 0; c < g.cols(); ++c) brow[c] += grow[c];
        }
        break;
      }
      case Op::leaky_relu: {
        const auto& a = val(n.a);
        auto& ga = grad_ref(n.a);
        for (std::size_t i = 0; i < a.size(); ++i)
          ga.flat()[i] += g.flat()[i] * (a.flat()[i] > 0.0 ? 1.0 : n.slope);
        break;
      }
      case Op::edgeconv:
        back_edgeconv(n);
        break;
      case Op::global_max_pool: {
        auto& ga = grad_ref(n.a);
        for (std::size_t c = 0; c < g.cols(); ++c)
          ga(static_cast<std::size_t>(n.arg(0, c)), c) += g(0, c);
        break;
      }
      case Op::softmax_ce: {
        const double gs = g(0, 0);
        auto& ga = grad_ref(n.a);
        for (std::size_t c = 0; c < ga.cols(); ++c) {
          double v = n.aux(0, c);
          if (c == static_cast<std::size_t>(n.label)) v -= 1.0;
          ga(0, c) += gs * v;
        }
        break;
      }
    }
  }

  void back_edgeconv(Node& n) {
    const Matrix& g = n.grad;
    const auto& xv = val(n.a);
    const auto& th = val(n.b);
    const auto& ph = val(n.c);
    auto& gx = grad_ref(n.a);
    auto& gth = grad_ref(n.b);
    auto& gph = grad_ref(n.c);
    auto& gb = grad_ref(n.d);
    const std::size_t d = xv.cols();
    const std::size_t m = th.cols();
    const auto& nbrs = *n.nbrs;
    const auto k = nbrs.k;
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      const auto grow = g.row(i);
      const auto xi = xv.row(i);
      const double scale =
          n.agg == conv::Aggregation::sum ? static_cast<double>(k) : 1.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double gv = grow[c];
        if (gv == 0.0) continue;
        gb(0, c) += gv;
        if (n.agg == conv::Aggregation::max) {
          const auto a = static_cast<std::size_t>(
              nbrs.indices(i, static_cast<std::size_t>(n.arg(i, c))));
          const auto xa = xv.row(a);
          auto gxa = gx.row(a);
          for (std::size_t l = 0; l < d; ++l) {
            gth(l, c) += gv * (xa[l] - xi[l]);
            gph(l, c) += gv * xi[l];
            gxa[l] += gv * th(l, c);
          }
        } else {
          for (std::int32_t r = 0; r < k; ++r) {
            const auto a = static_cast<std::size_t>(
                nbrs.indices(i, static_cast<std::size_t>(r)));
            const auto xa = xv.row(a);
            auto gxa = gx.row(a);
            for (std::size_t l = 0; l < d; ++l) {
              gth(l, c) += gv * (xa[l] - xi[l]);
              gxa[l] += gv * th(l, c);
            }
          }
          for (std::size_t l = 0; l < d; ++l) gph(l, c) += gv * scale * xi[l];
        }
        // Center pull-back through psi = phi - theta.
        auto gxi = gx.row(i);
        for (std::size_t l = 0; l < d; ++l)
          gxi[l] += gv * scale * (ph(l, c) - th(l, c));
      }
    }
  }

  static void accumulate(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.flat()[i] += src.flat()[i];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  double min_max_margin_ = std::numeric_limits<double>::infinity();
  double min_kink_margin_ = std::numeric_limits<double>::infinity();
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  double min_max_margin = std::numeric_limits<double>::infinity();
  double min_kink_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  bool pass = false;
};

// Central-difference check of the tape gradient. `build` constructs the same
// expression on a fresh tape each call, reading parameter values through the
// pointers in `params`; it returns {loss_id, param_node_ids} aligned with
// `params`. Neighbor tables must be fixed by the caller before the check so
// perturbation cannot change graph structure. Callers should screen instances
// by the reported margins: a max tie or relu kink within epsilon of the
// evaluation point invalidates the difference quotient.
template <typename BuildFn>
FiniteDiffReport finite_diff_check(BuildFn&& build,
                                   std::span<Matrix* const> params, double eps,
                                   double tol) {
  require(eps > 0.0, "finite_diff_check: eps must be positive");
  FiniteDiffReport rep;
  rep.tolerance = tol;

  Tape tape;
  auto [loss, pids] = build(tape);
  require(pids.size() == params.size(),
          "finite_diff_check: param id count mismatch");
  tape.backward(loss);
  rep.min_max_margin = tape.min_max_margin();
  rep.min_kink_margin = tape.min_kink_margin();
  std::vector<Matrix> analytic;
  analytic.reserve(pids.size());
  for (int pid : pids) analytic.push_back(tape.grad(pid));

  auto loss_at = [&]() {
    Tape t;
    auto [l, ids] = build(t);
    (void)ids;
    return t.value_scalar(l);
  };

  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& mat = *params[p];
    for (std::size_t e = 0; e < mat.size(); ++e) {
      const double saved = mat.flat()[e];
      mat.flat()[e] = saved + eps;
      const double up = loss_at();
      mat.flat()[e] = saved - eps;
      const double down = loss_at();
      mat.flat()[e] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[p].flat()[e];
      rep.max_rel_error = std::max(rep.max_rel_error, rel_diff(fd, an));
      ++rep.entries_checked;
    }
  }
  rep.pass = rep.max_rel_error < tol;
  return rep;
}

}  // namespace leangcn::ad
