#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "leangcn/common.hpp"

namespace leangcn {

// Dense row-major matrix with scalar allocation accounting.
//
// Deliberately not a linear algebra framework: kernels spell out their own
// loops so reduction order is fixed and results are bit-reproducible, which
// the exact-equality checks in the cost and shuffle tests rely on.
template <typename T>
class basic_matrix {
 public:
  basic_matrix() = default;

  basic_matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    alloc::track(data_.size());
    tracked_ = data_.size();
  }

  basic_matrix(const basic_matrix& other)
      : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    alloc::track(data_.size());
    tracked_ = data_.size();
  }

  basic_matrix(basic_matrix&& other) noexcept
      : rows_(other.rows_),
        cols_(other.cols_),
        data_(std::move(other.data_)),
        tracked_(other.tracked_) {
    other.rows_ = other.cols_ = 0;
    other.tracked_ = 0;
    other.data_.clear();
  }

  basic_matrix& operator=(const basic_matrix& other) {
    if (this != &other) {
      alloc::untrack(tracked_);
      rows_ = other.rows_;
      cols_ = other.cols_;
      data_ = other.data_;
      alloc::track(data_.size());
      tracked_ = data_.size();
    }
    return *this;
  }

  basic_matrix& operator=(basic_matrix&& other) noexcept {
    if (this != &other) {
      alloc::untrack(tracked_);
      rows_ = other.rows_;
      cols_ = other.cols_;
      data_ = std::move(other.data_);
      tracked_ = other.tracked_;
      other.rows_ = other.cols_ = 0;
      other.tracked_ = 0;
      other.data_.clear();
    }
    return *this;
  }

  ~basic_matrix() { alloc::untrack(tracked_); }

  static basic_matrix from_rows(
      std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    basic_matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c)
        throw std::invalid_argument("from_rows: ragged initializer");
      std::size_t j = 0;
      for (T v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<const T> flat() const { return {data_.data(), data_.size()}; }
  std::span<T> flat() { return {data_.data(), data_.size()}; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const basic_matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const basic_matrix& a, const basic_matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
  std::uint64_t tracked_ = 0;
};

using Matrix = basic_matrix<double>;
using IndexMatrix = basic_matrix<std::int32_t>;

inline bool all_finite(const Matrix& m) { return all_finite(m.flat()); }

// C = A * B with fixed i-k-j loop order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  Matrix c(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A^T * B, used by gradient accumulation.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts disagree");
  Matrix c(a.cols(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto arow = a.row(i);
    const auto brow = b.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      auto crow = c.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C = A * B^T.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts disagree");
  Matrix c(a.rows(), b.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

}  // namespace leangcn
