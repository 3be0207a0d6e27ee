#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace usm {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return data.size(); }
};

// y = A x
inline void matvec(const Matrix& a, std::span<const double> x, Vec& y) {
  if (x.size() != a.cols) throw std::invalid_argument("matvec: dim mismatch");
  y.assign(a.rows, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* w = a.data.data() + r * a.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

// y += A^T x
inline void matvec_transpose_add(const Matrix& a, std::span<const double> x,
                                 Vec& y) {
  if (x.size() != a.rows || y.size() != a.cols)
    throw std::invalid_argument("matvec_transpose_add: dim mismatch");
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* w = a.data.data() + r * a.cols;
    for (std::size_t c = 0; c < a.cols; ++c) y[c] += xr * w[c];
  }
}

// A += x y^T (outer product accumulation)
inline void outer_add(Matrix& a, std::span<const double> x,
                      std::span<const double> y) {
  if (x.size() != a.rows || y.size() != a.cols)
    throw std::invalid_argument("outer_add: dim mismatch");
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    double* w = a.data.data() + r * a.cols;
    for (std::size_t c = 0; c < a.cols; ++c) w[c] += xr * y[c];
  }
}

}  // namespace usm
