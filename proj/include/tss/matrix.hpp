#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

namespace tss {

/// Dense row-major matrix of doubles. Rows index the spatial axis throughout
/// the library, columns the semantic axis.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double at(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  double& operator()(std::size_t r, std::size_t c) { return at(r, c); }
  double operator()(std::size_t r, std::size_t c) const { return at(r, c); }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::vector<double> row_vector(std::size_t r) const {
    return std::vector<double>(row(r), row(r) + cols);
  }
  void set_row(std::size_t r, const std::vector<double>& v) {
    assert(v.size() == cols);
    for (std::size_t c = 0; c < cols; ++c) at(r, c) = v[c];
  }

  double total() const {
    return std::accumulate(data.begin(), data.end(), 0.0);
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
  }
  void set_column(std::size_t c, const std::vector<double>& v) {
    assert(v.size() == rows);
    for (std::size_t r = 0; r < rows; ++r) at(r, c) = v[r];
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

}  // namespace tss
