#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leangcn/common.hpp"

namespace leangcn::net {

// Execution strategy for a network.
//   baseline     per-layer exact KNN + definition-order edge conv
//   accelerated  per-block shared pool + rearranged conv (both savings)
//   accel_s1     shared pool only, conv stays definition-order
//   accel_s2     rearranged conv only, KNN stays per-layer
enum class Mode { baseline, accelerated, accel_s1, accel_s2 };

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::accelerated: return "accelerated";
    case Mode::accel_s1: return "accel-s1";
    case Mode::accel_s2: return "accel-s2";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "baseline") return Mode::baseline;
  if (s == "accelerated") return Mode::accelerated;
  if (s == "accel-s1") return Mode::accel_s1;
  if (s == "accel-s2") return Mode::accel_s2;
  throw std::invalid_argument("unknown mode: " + s);
}

// One residual-free stack of edge-conv layers sharing a neighborhood budget.
// widths[l] is the output dim of layer l; the pool window for layer l is
// k + l*p. dynamic selects the neighbor basis: current features when true,
// input coordinates when false (computed once and reused).
struct BlockSpec {
  std::int32_t layers = 0;
  std::int32_t k = 0;
  std::int32_t p = 0;
  std::vector<std::int32_t> widths;
  bool dynamic = true;
};

struct HeadSpec {
  std::vector<std::int32_t> hidden;
  std::int32_t classes = 2;
};

struct NetworkSpec {
  Mode mode = Mode::baseline;
  std::uint64_t seed = 1;
  std::int32_t input_dim = 3;
  std::int64_t points = 0;  // default cloud size for cost/bench; 0 = unset
  bool freeze_sampling = false;
  std::vector<BlockSpec> blocks;
  HeadSpec head;

  void validate() const {
    require(input_dim >= 1, "spec: input_dim must be positive");
    require(!blocks.empty(), "spec: need at least one block");
    for (const auto& b : blocks) {
      require(b.layers >= 1, "spec: block layer count must be positive");
      require(b.widths.size() == static_cast<std::size_t>(b.layers),
              "spec: widths length must equal layer count");
      for (auto w : b.widths) require(w >= 1, "spec: layer width must be positive");
      require(b.k >= 1, "spec: neighborhood size k must be positive");
      require(b.p >= 0, "spec: pool growth p must be non-negative");
    }
    require(head.classes >= 1, "spec: class count must be positive");
    for (auto h : head.hidden)
      require(h >= 1, "spec: head width must be positive");
    require(points >= 0, "spec: points must be non-negative");
  }
};

// Synthetic-shape training setup. Dataset sizes are exact; class labels are
// assigned round-robin so counts per class differ by at most one.
struct TrainConfig {
  std::int32_t classes = 3;
  std::int64_t train_size = 400;
  std::int64_t test_size = 100;
  std::int64_t cloud_points = 256;
  double noise_sigma = 0.02;
  bool rotate = false;
  std::int32_t epochs = 8;
  std::int32_t batch = 16;
  double lr = 0.05;
  double momentum = 0.9;
  double init_sigma = 0.1;
  std::int32_t runs = 1;
  std::uint64_t seed = 1;

  void validate() const {
    require(classes >= 1 && classes <= 3,
            "train: classes must be in [1, 3] (three shape families exist)");
    require(train_size >= 1 && test_size >= 1, "train: dataset sizes must be positive");
    require(cloud_points >= 8, "train: cloud_points must be at least 8");
    require(noise_sigma >= 0.0, "train: noise_sigma must be non-negative");
    require(epochs >= 1, "train: epochs must be positive");
    require(batch >= 1, "train: batch must be positive");
    require(lr > 0.0, "train: lr must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "train: momentum must be in [0, 1)");
    require(init_sigma > 0.0, "train: init_sigma must be positive");
    require(runs >= 1, "train: runs must be positive");
  }
};

}  // namespace leangcn::net
