// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <string>
#include <string_view>

#include "ftmp/error.hpp"

namespace ftmp::nc {

using Index = Eigen::Index;

// Dense column-major storage. Batched kernels put one sample per column.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A trainable tensor with its gradient buffer. Vectors are n x 1.
template <typename Scalar>
struct Param {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Param() = default;
  Param(Index rows, Index cols)
      : value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, std::string_view what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + std::string(what));
}

inline void check_shape(Index rows, Index cols, Index want_rows, Index want_cols,
                        std::string_view what) {
  if (rows != want_rows || cols != want_cols)
    throw NumericError(std::string(what) + ": expected " + std::to_string(want_rows) + "x" +
                       std::to_string(want_cols) + ", got " + std::to_string(rows) + "x" +
                       std::to_string(cols));
}

template <typename Scalar, typename Rng>
void fill_uniform(Matrix<Scalar>& m, Scalar bound, Rng& rng) {
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return Scalar(1) / (Scalar(1) + (-x).exp());
}

}  // namespace ftmp::nc
