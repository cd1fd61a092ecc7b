// Dense row-major matrix of 64-bit reals. The whole artifact runs in double
// precision; desk-scale graphs make that affordable and it keeps gradient
// checks stable.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "login/errors.hpp"

namespace login {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_shape(const Matrix& m, int rows, int cols, const char* what) {
  if (m.rows != rows || m.cols != cols)
    fail(ErrorKind::Numeric, std::string("shape mismatch in ") + what);
}

}  // namespace login
