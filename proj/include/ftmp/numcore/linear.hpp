// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ftmp/numcore/tensor.hpp"

namespace ftmp::nc {

// y = W x + b, batched over columns of x.
template <typename Scalar>
struct Linear {
  Param<Scalar> w;  // out x in
  Param<Scalar> b;  // out x 1

  Linear() = default;
  Linear(Index in, Index out) : w(out, in), b(out, 1) {}

  Index in_size() const { return w.cols(); }
  Index out_size() const { return w.rows(); }

  template <typename Rng>
  void init(Rng& rng) {
    fill_uniform(w.value, Scalar(1) / std::sqrt(static_cast<Scalar>(in_size())), rng);
    b.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    check_shape(x.rows(), x.cols(), in_size(), x.cols(), "linear input");
    Matrix<Scalar> y = w.value * x;
    y.colwise() += b.value.col(0);
    return y;
  }

  // Accumulates dW, db; returns dx.
  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    w.grad.noalias() += dy * x.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    return w.value.transpose() * dy;
  }

  void zero_grad() {
    w.zero_grad();
    b.zero_grad();
  }
};

}  // namespace ftmp::nc
