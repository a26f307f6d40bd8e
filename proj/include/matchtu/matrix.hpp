#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>

#include "matchtu/memory.hpp"

namespace matchtu {

// Dense row-major matrix of doubles over tracked storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}
  Matrix(std::size_t rows, std::size_t cols, double fill)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) {
        throw std::invalid_argument("Matrix::from_rows: ragged rows");
      }
      std::size_t j = 0;
      for (double value : row) m(i, j++) = value;
      ++i;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::span<const double> row_span(std::size_t r) const {
    return {row(r), cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  DVec data_;
};

// Four-lane dot product with a fixed reduction order. The result depends only
// on the operand values and the length, never on how the surrounding loops
// are batched or threaded.
inline double dot(const double* a, const double* b, std::size_t n) {
  double lane0 = 0.0, lane1 = 0.0, lane2 = 0.0, lane3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lane0 += a[i] * b[i];
    lane1 += a[i + 1] * b[i + 1];
    lane2 += a[i + 2] * b[i + 2];
    lane3 += a[i + 3] * b[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((lane0 + lane1) + (lane2 + lane3)) + tail;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch");
  }
  return dot(a.data(), b.data(), a.size());
}

// Strictly sequential dot product. Used where a running left-to-right sum
// must match an accumulation performed elsewhere one term at a time.
inline double dot_sequential(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace matchtu
