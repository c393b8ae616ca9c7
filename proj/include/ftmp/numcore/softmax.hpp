// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "ftmp/numcore/tensor.hpp"

namespace ftmp::nc {

// Column-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  check_finite(logits, "logits");
  Matrix<Scalar> p = logits;
  for (Index j = 0; j < p.cols(); ++j) {
    auto col = p.col(j);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return p;
}

template <typename Scalar>
struct SoftmaxXent {
  Scalar loss = 0;
  Vector<Scalar> grad;   // d loss / d logits
  Vector<Scalar> probs;
};

// loss = -weight * log softmax(logits)[label]
template <typename Scalar>
SoftmaxXent<Scalar> softmax_xent(const Vector<Scalar>& logits, Index label, Scalar weight) {
  if (logits.size() < 2) throw NumericError("softmax_xent: need at least 2 classes");
  if (label < 0 || label >= logits.size()) throw NumericError("softmax_xent: label out of range");
  if (!(weight > 0)) throw NumericError("softmax_xent: weight must be positive");
  check_finite(logits, "logits");
  SoftmaxXent<Scalar> out;
  const Scalar m = logits.maxCoeff();
  Vector<Scalar> shifted = logits.array() - m;
  const Scalar log_z = std::log(shifted.array().exp().sum());
  out.probs = (shifted.array() - log_z).exp().matrix();
  out.loss = -weight * (shifted(label) - log_z);
  out.grad = weight * out.probs;
  out.grad(label) -= weight;
  return out;
}

// Batched form: column j uses labels[j] and coefficient coef[j] (which may
// be zero, e.g. a class with no training examples). Returns the summed
// loss and writes d loss / d logits.
template <typename Scalar>
Scalar softmax_xent_batch(const Matrix<Scalar>& logits, std::span<const int> labels,
                          std::span<const Scalar> coef, Matrix<Scalar>& probs,
                          Matrix<Scalar>& dlogits) {
  const Index batch = logits.cols();
  if (static_cast<Index>(labels.size()) != batch || static_cast<Index>(coef.size()) != batch)
    throw NumericError("softmax_xent_batch: label/coefficient count mismatch");
  probs = softmax(logits);
  dlogits = probs;
  Scalar loss = 0;
  for (Index j = 0; j < batch; ++j) {
    const int y = labels[j];
    if (y < 0 || y >= logits.rows()) throw NumericError("softmax_xent_batch: label out of range");
    const Scalar col_max = logits.col(j).maxCoeff();
    const Scalar log_z = std::log((logits.col(j).array() - col_max).exp().sum()) + col_max;
    loss += coef[j] * (log_z - logits(y, j));
    dlogits(y, j) -= Scalar(1);
    dlogits.col(j) *= coef[j];
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

// Lowest index wins ties.
template <typename Derived>
Index argmax(const Eigen::DenseBase<Derived>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

}  // namespace ftmp::nc
