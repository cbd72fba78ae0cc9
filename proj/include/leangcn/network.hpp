#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "leangcn/autodiff.hpp"
#include "leangcn/common.hpp"
#include "leangcn/graphconv.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/netspec.hpp"
#include "leangcn/rng.hpp"

namespace leangcn::net {

// ============================================================================
// parameters
// ============================================================================

struct ConvLayerParams {
  Matrix theta;  // d x M
  Matrix phi;    // d x M
  Matrix bias;   // 1 x M
};

struct DenseLayerParams {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
};

struct Params {
  std::vector<ConvLayerParams> convs;
  std::vector<DenseLayerParams> dense;

  // Fixed flattening order used everywhere gradients or serialized blobs
  // line up with parameters: per conv layer theta, phi, bias; then per dense
  // layer w, b.
  std::vector<Matrix*> all() {
    std::vector<Matrix*> out;
    for (auto& c : convs) {
      out.push_back(&c.theta);
      out.push_back(&c.phi);
      out.push_back(&c.bias);
    }
    for (auto& d : dense) {
      out.push_back(&d.w);
      out.push_back(&d.b);
    }
    return out;
  }

  std::vector<std::pair<std::string, const Matrix*>> named() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (std::size_t c = 0; c < convs.size(); ++c) {
      const std::string base = "conv" + std::to_string(c);
      out.emplace_back(base + ".theta", &convs[c].theta);
      out.emplace_back(base + ".phi", &convs[c].phi);
      out.emplace_back(base + ".bias", &convs[c].bias);
    }
    for (std::size_t d = 0; d < dense.size(); ++d) {
      const std::string base = "dense" + std::to_string(d);
      out.emplace_back(base + ".w", &dense[d].w);
      out.emplace_back(base + ".b", &dense[d].b);
    }
    return out;
  }
};

// Gaussian weights, zero biases. Each matrix gets its own keyed stream so the
// values do not depend on construction order elsewhere.
inline Params init_params(const NetworkSpec& spec, std::uint64_t seed,
                          double sigma) {
  spec.validate();
  require(sigma > 0.0, "init_params: sigma must be positive");
  Params p;
  std::uint64_t stream = 0;
  auto gauss = [&](std::size_t rows, std::size_t cols) {
    CounterRng rng(seed, ++stream);
    Matrix m(rows, cols);
    for (std::size_t e = 0; e < m.size(); ++e)
      m.flat()[e] = sigma * rng.next_normal();
    return m;
  };
  std::size_t d = static_cast<std::size_t>(spec.input_dim);
  for (const auto& blk : spec.blocks)
    for (auto w : blk.widths) {
      const auto m = static_cast<std::size_t>(w);
      ConvLayerParams c;
      c.theta = gauss(d, m);
      c.phi = gauss(d, m);
      c.bias = Matrix(1, m, 0.0);
      p.convs.push_back(std::move(c));
      d = m;
    }
  std::size_t in = d;
  for (auto h : spec.head.hidden) {
    const auto out = static_cast<std::size_t>(h);
    p.dense.push_back({gauss(in, out), Matrix(1, out, 0.0)});
    in = out;
  }
  const auto classes = static_cast<std::size_t>(spec.head.classes);
  p.dense.push_back({gauss(in, classes), Matrix(1, classes, 0.0)});
  return p;
}

// ============================================================================
// inference forward
// ============================================================================

struct ForwardTrace {
  std::vector<Matrix> conv_features;  // post-activation output per conv layer
};

namespace detail {

inline bool uses_pool(Mode m) {
  return m == Mode::accelerated || m == Mode::accel_s1;
}
inline bool uses_shuffle(Mode m) {
  return m == Mode::accelerated || m == Mode::accel_s2;
}

inline void check_params(const NetworkSpec& spec, const Params& params) {
  std::size_t layers = 0;
  for (const auto& b : spec.blocks) layers += b.widths.size();
  require(params.convs.size() == layers, "forward: conv parameter count mismatch");
  require(params.dense.size() == spec.head.hidden.size() + 1,
          "forward: dense parameter count mismatch");
}

inline Matrix column_max(const Matrix& x) {
  Matrix out(1, x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double best = x(0, c);
    for (std::size_t i = 1; i < x.rows(); ++i) best = std::max(best, x(i, c));
    out(0, c) = best;
  }
  return out;
}

inline Matrix dense_forward(const Matrix& h, const DenseLayerParams& layer) {
  Matrix z = matmul(h, layer.w);
  const auto b = layer.b.row(0);
  for (std::size_t c = 0; c < z.cols(); ++c) z(0, c) += b[c];
  return z;
}

}  // namespace detail

// Run the network on one cloud; returns 1 x classes logits. sampling_seed
// keys the pooled modes' per-layer neighbor draws; baseline ignores it.
inline Matrix forward(const NetworkSpec& spec, const Params& params,
                      const Matrix& cloud, std::uint64_t sampling_seed = 0,
                      ForwardTrace* trace = nullptr) {
  spec.validate();
  detail::check_params(spec, params);
  require(cloud.rows() >= 1, "forward: empty cloud");
  require(cloud.cols() == static_cast<std::size_t>(spec.input_dim),
          "forward: cloud dimension does not match spec input_dim");
  require(all_finite(cloud), "forward: non-finite cloud entry");

  const bool pooled = detail::uses_pool(spec.mode);
  const bool shuffled = detail::uses_shuffle(spec.mode);
  Matrix features = cloud;
  std::size_t conv_idx = 0;
  std::map<std::int32_t, knn::NeighborIndex> static_search;           // by k
  std::map<std::pair<std::int32_t, std::int32_t>, knn::NeighborPool>
      static_pools;  // by (k, width)

  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    const std::uint64_t block_seed = derive_seed(sampling_seed, b + 1);
    const knn::NeighborPool* pool = nullptr;
    knn::NeighborPool local_pool;
    if (pooled) {
      if (blk.dynamic) {
        local_pool = knn::build_pool(features, blk.k, blk.p, blk.layers);
        pool = &local_pool;
      } else {
        const auto width = static_cast<std::int32_t>(
            std::min<std::int64_t>(blk.k + std::int64_t{blk.layers - 1} * blk.p,
                                   static_cast<std::int64_t>(cloud.rows())));
        const auto key = std::make_pair(blk.k, width);
        auto it = static_pools.find(key);
        if (it == static_pools.end())
          it = static_pools
                   .emplace(key,
                            knn::build_pool(cloud, blk.k, blk.p, blk.layers))
                   .first;
        pool = &it->second;
      }
    }
    for (std::int32_t l = 1; l <= blk.layers; ++l) {
      knn::NeighborIndex nbrs;
      if (pooled) {
        nbrs = knn::sample_neighbors(*pool, l, block_seed);
      } else if (blk.dynamic) {
        nbrs = knn::knn_search(features, blk.k);
      } else {
        auto it = static_search.find(blk.k);
        if (it == static_search.end())
          it = static_search.emplace(blk.k, knn::knn_search(cloud, blk.k))
                   .first;
        nbrs = it->second;
      }
      const auto& lp = params.convs[conv_idx++];
      conv::ConvParams cp(lp.theta, lp.phi, lp.bias);
      Matrix h = shuffled ? conv::edgeconv_shuffled(features, nbrs, cp,
                                                    conv::Aggregation::max)
                          : conv::edgeconv_baseline(features, nbrs, cp,
                                                    conv::Aggregation::max);
      features = conv::leaky_relu(h);
      if (trace) trace->conv_features.push_back(features);
    }
  }

  Matrix h = detail::column_max(features);
  for (std::size_t d = 0; d + 1 < params.dense.size(); ++d)
    h = conv::leaky_relu(detail::dense_forward(h, params.dense[d]));
  return detail::dense_forward(h, params.dense.back());
}

// ============================================================================
// training tape
// ============================================================================

namespace detail {

struct TapeNet {
  int loss = -1;
  std::vector<int> param_ids;  // aligned with Params::all()
};

// Builds the per-sample training expression. Neighbor selection happens on
// the tape's current values (define-by-run) and is frozen into the arena;
// gradients do not flow through index selection.
inline TapeNet build_tape(
    ad::Tape& tape, const NetworkSpec& spec, const Params& params,
    const Matrix& cloud, std::int32_t label, std::uint64_t sampling_seed,
    std::vector<std::unique_ptr<knn::NeighborIndex>>& arena) {
  check_params(spec, params);
  const bool pooled = uses_pool(spec.mode);
  const bool shuffled_mode = uses_shuffle(spec.mode);
  (void)shuffled_mode;  // the tape kernel is the rearranged form for every mode
  TapeNet tn;
  int x = tape.input(cloud);
  std::size_t conv_idx = 0;
  std::vector<int> conv_param_ids;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    const std::uint64_t block_seed = derive_seed(sampling_seed, b + 1);
    knn::NeighborPool pool;
    if (pooled) {
      const Matrix& basis = blk.dynamic ? tape.value(x) : cloud;
      pool = knn::build_pool(basis, blk.k, blk.p, blk.layers);
    }
    for (std::int32_t l = 1; l <= blk.layers; ++l) {
      auto nbrs = std::make_unique<knn::NeighborIndex>();
      if (pooled) {
        *nbrs = knn::sample_neighbors(pool, l, block_seed);
      } else {
        const Matrix& basis = blk.dynamic ? tape.value(x) : cloud;
        *nbrs = knn::knn_search(basis, blk.k);
      }
      const auto& lp = params.convs[conv_idx++];
      const int th = tape.param(lp.theta);
      const int ph = tape.param(lp.phi);
      const int bi = tape.param(lp.bias);
      conv_param_ids.push_back(th);
      conv_param_ids.push_back(ph);
      conv_param_ids.push_back(bi);
      const int h =
          tape.edgeconv(x, *nbrs, th, ph, bi, conv::Aggregation::max);
      x = tape.leaky_relu(h);
      arena.push_back(std::move(nbrs));
    }
  }
  int h = tape.global_max_pool(x);
  std::vector<int> dense_param_ids;
  for (std::size_t d = 0; d < params.dense.size(); ++d) {
    const int w = tape.param(params.dense[d].w);
    const int bb = tape.param(params.dense[d].b);
    dense_param_ids.push_back(w);
    dense_param_ids.push_back(bb);
    h = tape.add_bias(tape.matmul(h, w), bb);
    if (d + 1 < params.dense.size()) h = tape.leaky_relu(h);
  }
  tn.loss = tape.softmax_cross_entropy(h, label);
  tn.param_ids = std::move(conv_param_ids);
  tn.param_ids.insert(tn.param_ids.end(), dense_param_ids.begin(),
                      dense_param_ids.end());
  return tn;
}

}  // namespace detail

// ============================================================================
// synthetic shapes
// ============================================================================

struct Dataset {
  std::vector<Matrix> clouds;
  std::vector<std::int32_t> labels;
};

namespace detail {

// Shape families: 0 unit sphere surface, 1 cube surface (half-side 0.8,
// faces uniform by area), 2 flat square in the z=0 plane.
inline void sample_shape_point(CounterRng& rng, std::int32_t shape,
                               double* xyz) {
  switch (shape) {
    case 0: {
      double n0, n1, n2, norm;
      do {
        n0 = rng.next_normal();
        n1 = rng.next_normal();
        n2 = rng.next_normal();
        norm = std::sqrt(n0 * n0 + n1 * n1 + n2 * n2);
      } while (norm < 1e-9);
      xyz[0] = n0 / norm;
      xyz[1] = n1 / norm;
      xyz[2] = n2 / norm;
      break;
    }
    case 1: {
      const double half = 0.8;
      const auto face = static_cast<std::int32_t>(rng.next_below(6));
      const double u = (2.0 * rng.next_double() - 1.0) * half;
      const double v = (2.0 * rng.next_double() - 1.0) * half;
      const std::int32_t axis = face / 2;
      const double fixed = (face % 2 == 0) ? half : -half;
      xyz[axis] = fixed;
      xyz[(axis + 1) % 3] = u;
      xyz[(axis + 2) % 3] = v;
      break;
    }
    default: {
      xyz[0] = 2.0 * rng.next_double() - 1.0;
      xyz[1] = 2.0 * rng.next_double() - 1.0;
      xyz[2] = 0.0;
      break;
    }
  }
}

// Uniform random rotation from a normalized 4-normal quaternion.
inline void random_rotation(CounterRng& rng, double r[3][3]) {
  double q[4], norm;
  do {
    for (double& v : q) v = rng.next_normal();
    norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  } while (norm < 1e-9);
  for (double& v : q) v /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  r[0][0] = 1 - 2 * (y * y + z * z);
  r[0][1] = 2 * (x * y - w * z);
  r[0][2] = 2 * (x * z + w * y);
  r[1][0] = 2 * (x * y + w * z);
  r[1][1] = 1 - 2 * (x * x + z * z);
  r[1][2] = 2 * (y * z - w * x);
  r[2][0] = 2 * (x * z - w * y);
  r[2][1] = 2 * (y * z + w * x);
  r[2][2] = 1 - 2 * (x * x + y * y);
}

}  // namespace detail

// Deterministic labeled clouds; stream keyed (seed, split_tag, cloud index).
// Labels cycle through the classes so counts differ by at most one.
inline Dataset generate_synthetic_dataset(const TrainConfig& cfg,
                                          std::uint64_t split_tag,
                                          std::int64_t count) {
  cfg.validate();
  require(count >= 1, "generate_synthetic_dataset: count must be positive");
  Dataset ds;
  ds.clouds.reserve(static_cast<std::size_t>(count));
  ds.labels.reserve(static_cast<std::size_t>(count));
  for (std::int64_t idx = 0; idx < count; ++idx) {
    CounterRng rng(cfg.seed, split_tag, static_cast<std::uint64_t>(idx));
    const auto label = static_cast<std::int32_t>(idx % cfg.classes);
    Matrix cloud(static_cast<std::size_t>(cfg.cloud_points), 3);
    double rot[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    if (cfg.rotate) detail::random_rotation(rng, rot);
    for (std::size_t p = 0; p < cloud.rows(); ++p) {
      double xyz[3] = {0, 0, 0};
      detail::sample_shape_point(rng, label, xyz);
      if (cfg.rotate) {
        const double rx = rot[0][0] * xyz[0] + rot[0][1] * xyz[1] + rot[0][2] * xyz[2];
        const double ry = rot[1][0] * xyz[0] + rot[1][1] * xyz[1] + rot[1][2] * xyz[2];
        const double rz = rot[2][0] * xyz[0] + rot[2][1] * xyz[1] + rot[2][2] * xyz[2];
        xyz[0] = rx;
        xyz[1] = ry;
        xyz[2] = rz;
      }
      for (std::size_t c = 0; c < 3; ++c)
        cloud(p, c) = xyz[c] + cfg.noise_sigma * rng.next_normal();
    }
    ds.clouds.push_back(std::move(cloud));
    ds.labels.push_back(label);
  }
  return ds;
}

// ============================================================================
// training
// ============================================================================

struct RunResult {
  std::uint64_t run_seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double final_epoch_loss = 0.0;
};

struct TrainResult {
  std::vector<RunResult> runs;
  double mean_test_accuracy = 0.0;
  double test_accuracy_variance = 0.0;
  Params first_run_params;
};

inline std::int32_t predict(const Matrix& logits) {
  std::int32_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c)
    if (logits(0, c) > logits(0, best)) best = static_cast<std::int32_t>(c);
  return best;
}

inline double evaluate(const NetworkSpec& spec, const Params& params,
                       const Dataset& ds, std::uint64_t eval_seed) {
  std::size_t correct = 0;
  for (std::size_t s = 0; s < ds.clouds.size(); ++s) {
    const Matrix logits = forward(spec, params, ds.clouds[s],
                                  derive_seed(eval_seed, s));
    if (predict(logits) == ds.labels[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.clouds.size());
}

// Gradient descent with momentum over the synthetic dataset. The dataset is
// fixed by cfg.seed; each run re-initializes parameters and re-shuffles with
// its own derived seed, so run-to-run spread reflects training noise only.
inline TrainResult train_synthetic(const NetworkSpec& spec,
                                   const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  require(spec.input_dim == 3, "train: synthetic clouds are 3-dimensional");
  require(spec.head.classes == cfg.classes,
          "train: spec class count must match dataset classes");

  const Dataset train_ds = generate_synthetic_dataset(cfg, 1, cfg.train_size);
  const Dataset test_ds = generate_synthetic_dataset(cfg, 2, cfg.test_size);

  TrainResult result;
  for (std::int32_t r = 0; r < cfg.runs; ++r) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r));
    Params params = init_params(spec, derive_seed(run_seed, 1), cfg.init_sigma);
    auto tensors = params.all();
    std::vector<Matrix> velocity;
    std::vector<Matrix> grad_accum;
    velocity.reserve(tensors.size());
    grad_accum.reserve(tensors.size());
    for (auto* t : tensors) {
      velocity.emplace_back(t->rows(), t->cols(), 0.0);
      grad_accum.emplace_back(t->rows(), t->cols(), 0.0);
    }

    std::vector<std::size_t> order(train_ds.clouds.size());
    double last_epoch_loss = 0.0;
    for (std::int32_t e = 0; e < cfg.epochs; ++e) {
      std::iota(order.begin(), order.end(), 0);
      CounterRng shuffle_rng(run_seed, 2, static_cast<std::uint64_t>(e));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1],
                  order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);
      const std::uint64_t pass_seed =
          spec.freeze_sampling ? derive_seed(run_seed, 3, 0)
                               : derive_seed(run_seed, 3, static_cast<std::uint64_t>(e));

      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(cfg.batch)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
        for (auto& g : grad_accum) g.fill(0.0);
        for (std::size_t s = start; s < stop; ++s) {
          const std::size_t idx = order[s];
          ad::Tape tape;
          std::vector<std::unique_ptr<knn::NeighborIndex>> arena;
          const auto tn = detail::build_tape(tape, spec, params,
                                             train_ds.clouds[idx],
                                             train_ds.labels[idx],
                                             derive_seed(pass_seed, idx), arena);
          const double loss = tape.value_scalar(tn.loss);
          if (!std::isfinite(loss))
            throw std::runtime_error(
                "train: loss diverged (non-finite) at epoch " +
                std::to_string(e) + ", sample " + std::to_string(idx));
          epoch_loss += loss;
          tape.backward(tn.loss);
          for (std::size_t p = 0; p < tensors.size(); ++p) {
            const auto& g = tape.grad(tn.param_ids[p]);
            for (std::size_t q = 0; q < g.size(); ++q)
              grad_accum[p].flat()[q] += g.flat()[q];
          }
        }
        const double inv = 1.0 / static_cast<double>(stop - start);
        for (std::size_t p = 0; p < tensors.size(); ++p) {
          auto& v = velocity[p];
          auto& t = *tensors[p];
          for (std::size_t q = 0; q < v.size(); ++q) {
            v.flat()[q] = cfg.momentum * v.flat()[q] +
                          grad_accum[p].flat()[q] * inv;
            t.flat()[q] -= cfg.lr * v.flat()[q];
          }
        }
      }
      last_epoch_loss = epoch_loss / static_cast<double>(order.size());
    }

    RunResult rr;
    rr.run_seed = run_seed;
    rr.final_epoch_loss = last_epoch_loss;
    rr.train_accuracy = evaluate(spec, params, train_ds, derive_seed(run_seed, 4));
    rr.test_accuracy = evaluate(spec, params, test_ds, derive_seed(run_seed, 5));
    result.runs.push_back(rr);
    if (r == 0) result.first_run_params = std::move(params);
  }

  double mean = 0.0;
  for (const auto& rr : result.runs) mean += rr.test_accuracy;
  mean /= static_cast<double>(result.runs.size());
  double var = 0.0;
  for (const auto& rr : result.runs) {
    const double dv = rr.test_accuracy - mean;
    var += dv * dv;
  }
  var /= static_cast<double>(result.runs.size());
  result.mean_test_accuracy = mean;
  result.test_accuracy_variance = var;
  return result;
}

}  // namespace leangcn::net
