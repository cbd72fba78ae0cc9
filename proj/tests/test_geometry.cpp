#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "leangcn/geometry.hpp"
#include "leangcn/knn.hpp"
#include "leangcn/matrix.hpp"
#include "leangcn/rng.hpp"
#include "support/oracles.hpp"

using namespace leangcn;

TEST_CASE("pairwise squared distances match hand values") {
  SECTION("two unit-separated points") {
    const Matrix pts = Matrix::from_rows({{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}});
    const Matrix d = geom::pairwise_sq_distances(pts);
    REQUIRE(d == Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}));
  }
  SECTION("single point gives the 1x1 zero matrix") {
    const Matrix pts = Matrix::from_rows({{5.0, 5.0}});
    const Matrix d = geom::pairwise_sq_distances(pts);
    REQUIRE(d.rows() == 1);
    REQUIRE(d(0, 0) == 0.0);
  }
  SECTION("collinear 3-4-5 spaced points") {
    const Matrix pts = Matrix::from_rows({{0.0, 0.0}, {3.0, 4.0}, {6.0, 8.0}});
    const Matrix d = geom::pairwise_sq_distances(pts);
    REQUIRE(d(0, 1) == 25.0);
    REQUIRE(d(0, 2) == 100.0);
    REQUIRE(d(1, 2) == 25.0);
  }
}

TEST_CASE("pairwise squared distances are symmetric with a zero diagonal") {
  const Matrix pts = oracle::random_matrix(24, 3, 11);
  const Matrix d = geom::pairwise_sq_distances(pts);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    REQUIRE(d(i, i) == 0.0);
    for (std::size_t j = 0; j < pts.rows(); ++j) {
      REQUIRE(d(i, j) == d(j, i));
      REQUIRE(d(i, j) >= 0.0);
    }
  }
}

TEST_CASE("pairwise distance rejects bad input") {
  REQUIRE_THROWS_AS(geom::pairwise_sq_distances(Matrix()),
                    std::invalid_argument);
  Matrix bad(2, 2, 1.0);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(geom::pairwise_sq_distances(bad), std::invalid_argument);
  REQUIRE_THROWS_AS(
      geom::sq_distance(std::vector<double>{1.0, 2.0},
                        std::vector<double>{1.0, 2.0, 3.0}),
      std::invalid_argument);
}

TEST_CASE("expanded-form distance table agrees with the direct form") {
  const Matrix pts = oracle::random_matrix(40, 4, 17, 10.0);
  const Matrix direct = geom::pairwise_sq_distances(pts);
  const Matrix fast = geom::pairwise_sq_distances_fast(pts);
  double worst = 0.0;
  for (std::size_t e = 0; e < direct.size(); ++e) {
    REQUIRE(fast.flat()[e] >= 0.0);
    worst = std::max(worst, rel_diff(direct.flat()[e], fast.flat()[e]));
  }
  REQUIRE(worst < 1e-9);
}

TEST_CASE("neighborhood distance sums rank-paired member distances") {
  SECTION("single-member neighborhoods") {
    const Matrix f = Matrix::from_rows({{0.0, 0.0, 0.0}, {3.0, 4.0, 0.0}});
    const std::vector<std::int32_t> a{0}, b{1};
    REQUIRE(geom::neighborhood_distance(f, a, b) == 25.0);
    REQUIRE(geom::neighborhood_centroid_distance(f, a, b) == 25.0);
  }
  SECTION("two parallel member pairs") {
    const Matrix f = Matrix::from_rows(
        {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
    const std::vector<std::int32_t> a{0, 1}, b{2, 3};
    REQUIRE(geom::neighborhood_distance(f, a, b) == 2.0);
    REQUIRE(geom::neighborhood_centroid_distance(f, a, b) == 1.0);
  }
  SECTION("identical member sequences give zero") {
    const Matrix f = oracle::random_matrix(6, 3, 3);
    const std::vector<std::int32_t> a{0, 2, 4};
    REQUIRE(geom::neighborhood_distance(f, a, a) == 0.0);
    REQUIRE(geom::neighborhood_centroid_distance(f, a, a) == 0.0);
  }
  SECTION("size mismatch and empty neighborhoods are rejected") {
    const Matrix f = oracle::random_matrix(4, 2, 5);
    const std::vector<std::int32_t> a{0, 1}, b{2};
    REQUIRE_THROWS_AS(geom::neighborhood_distance(f, a, b),
                      std::invalid_argument);
    const std::vector<std::int32_t> e;
    REQUIRE_THROWS_AS(geom::neighborhood_distance(f, e, e),
                      std::invalid_argument);
  }
}

TEST_CASE("centroid distance is bounded by the alignment sum over K") {
  // Cauchy-Schwarz consequence, exercised on real neighbor tables.
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Matrix pts = oracle::random_matrix(30, 3, 100 + trial);
    const std::int32_t k = 1 + static_cast<std::int32_t>(trial % 6);
    const auto nbrs = knn::knn_search(pts, k);
    CounterRng rng(200 + trial);
    for (int pair = 0; pair < 10; ++pair) {
      const auto i = static_cast<std::size_t>(rng.next_below(30));
      const auto j = static_cast<std::size_t>(rng.next_below(30));
      const double dn =
          geom::neighborhood_distance(pts, nbrs.indices.row(i),
                                      nbrs.indices.row(j));
      const double dnc = geom::neighborhood_centroid_distance(
          pts, nbrs.indices.row(i), nbrs.indices.row(j));
      REQUIRE(dnc <= dn / static_cast<double>(k) + 1e-12);
    }
  }
}

TEST_CASE("both neighborhood metrics are translation invariant") {
  const Matrix f = oracle::random_matrix(20, 3, 77);
  Matrix shifted = f;
  const double c[3] = {12.5, -3.25, 0.75};
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t l = 0; l < 3; ++l) shifted(i, l) += c[l];
  const std::vector<std::int32_t> a{0, 3, 5, 9}, b{2, 4, 8, 11};
  const double dn0 = geom::neighborhood_distance(f, a, b);
  const double dn1 = geom::neighborhood_distance(shifted, a, b);
  const double dc0 = geom::neighborhood_centroid_distance(f, a, b);
  const double dc1 = geom::neighborhood_centroid_distance(shifted, a, b);
  REQUIRE(rel_diff(dn0, dn1) < 1e-12);
  REQUIRE(rel_diff(dc0, dc1) < 1e-12);
}
