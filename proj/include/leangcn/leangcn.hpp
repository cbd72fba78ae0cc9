#pragma once

// Umbrella header: the whole library.

#include "leangcn/autodiff.hpp"
#include "leangcn/bench.hpp"
#include "leangcn/common.hpp"
#include "leangcn/cost.hpp"
#include "leangcn/geometry.hpp"
#include "leangcn/graphconv.hpp"
#include "leangcn/io.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/netspec.hpp"
#include "leangcn/network.hpp"
#include "leangcn/rng.hpp"
#include "leangcn/verify.hpp"
