// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <type_traits>
#include <vector>

#include "ftmp/numcore/tensor.hpp"

namespace ftmp::nc {

// Single-layer GRU (Cho et al.), reset gate applied before U_h:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * h~
// The three gate blocks are stacked row-wise in the order z, r, h.
template <typename Scalar>
struct GruParams {
  Param<Scalar> w;  // 3H x D
  Param<Scalar> u;  // 3H x H
  Param<Scalar> b;  // 3H x 1

  GruParams() = default;
  GruParams(Index input_size, Index hidden_size)
      : w(3 * hidden_size, input_size), u(3 * hidden_size, hidden_size), b(3 * hidden_size, 1) {}

  Index input_size() const { return w.cols(); }
  Index hidden_size() const { return u.cols(); }

  auto w_z() { return w.value.topRows(hidden_size()); }
  auto w_r() { return w.value.middleRows(hidden_size(), hidden_size()); }
  auto w_h() { return w.value.bottomRows(hidden_size()); }
  auto u_z() { return u.value.topRows(hidden_size()); }
  auto u_r() { return u.value.middleRows(hidden_size(), hidden_size()); }
  auto u_h() { return u.value.bottomRows(hidden_size()); }
  auto b_z() { return b.value.topRows(hidden_size()); }
  auto b_r() { return b.value.middleRows(hidden_size(), hidden_size()); }
  auto b_h() { return b.value.bottomRows(hidden_size()); }

  template <typename Rng>
  void init(Rng& rng) {
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(hidden_size()));
    fill_uniform(w.value, bound, rng);
    fill_uniform(u.value, bound, rng);
    b.value.setZero();
  }

  void zero_grad() {
    w.zero_grad();
    u.zero_grad();
    b.zero_grad();
  }
};

// Everything one step's backward pass needs. `mask` (1 x B, optional)
// freezes columns whose sequence has already ended: h' = h there.
template <typename Scalar>
struct GruStep {
  Matrix<Scalar> x, h_prev, z, r, cand, h;
  Matrix<Scalar> mask;  // empty = all columns active
};

template <typename Scalar>
GruStep<Scalar> gru_cell_forward(const Matrix<Scalar>& x, const Matrix<Scalar>& h_prev,
                                 const GruParams<Scalar>& p, const Matrix<Scalar>* mask = nullptr) {
  const Index hs = p.hidden_size();
  const Index batch = x.cols();
  check_shape(x.rows(), x.cols(), p.input_size(), batch, "gru input");
  check_shape(h_prev.rows(), h_prev.cols(), hs, batch, "gru hidden state");

  GruStep<Scalar> s;
  s.x = x;
  s.h_prev = h_prev;
  Matrix<Scalar> gates = p.w.value * x;
  gates.colwise() += p.b.value.col(0);
  gates.topRows(2 * hs).noalias() += p.u.value.topRows(2 * hs) * h_prev;
  s.z = sigmoid(gates.topRows(hs).array()).matrix();
  s.r = sigmoid(gates.middleRows(hs, hs).array()).matrix();
  Matrix<Scalar> rh = s.r.cwiseProduct(h_prev);
  gates.bottomRows(hs).noalias() += p.u.value.bottomRows(hs) * rh;
  s.cand = gates.bottomRows(hs).array().tanh().matrix();
  s.h = h_prev + s.z.cwiseProduct(s.cand - h_prev);
  if (mask) {
    check_shape(mask->rows(), mask->cols(), 1, batch, "gru mask");
    s.mask = *mask;
    for (Index j = 0; j < batch; ++j)
      if ((*mask)(0, j) == Scalar(0)) s.h.col(j) = h_prev.col(j);
  }
  check_finite(s.h, "gru hidden state");
  return s;
}

template <typename Scalar>
struct GruStepGrads {
  Matrix<Scalar> dx, dh_prev;
};

// Accumulates parameter gradients into p.*.grad and returns the input and
// previous-state gradients.
template <typename Scalar>
GruStepGrads<Scalar> gru_cell_backward(const GruStep<Scalar>& s, const Matrix<Scalar>& dh,
                                       GruParams<Scalar>& p) {
  const Index hs = p.hidden_size();
  check_shape(dh.rows(), dh.cols(), hs, s.h.cols(), "gru upstream gradient");

  Matrix<Scalar> dh_new = dh;
  GruStepGrads<Scalar> g;
  g.dh_prev = Matrix<Scalar>::Zero(hs, dh.cols());
  if (s.mask.size()) {
    for (Index j = 0; j < dh.cols(); ++j) {
      if (s.mask(0, j) == Scalar(0)) {
        g.dh_prev.col(j) = dh.col(j);
        dh_new.col(j).setZero();
      }
    }
  }

  const auto z = s.z.array();
  const auto r = s.r.array();
  const auto cand = s.cand.array();
  Matrix<Scalar> dgates(3 * hs, dh.cols());
  // d(pre-activation) for z, r and the candidate.
  dgates.bottomRows(hs) = (dh_new.array() * z * (Scalar(1) - cand.square())).matrix();
  dgates.topRows(hs) =
      (dh_new.array() * (cand - s.h_prev.array()) * z * (Scalar(1) - z)).matrix();
  Matrix<Scalar> drh = p.u.value.bottomRows(hs).transpose() * dgates.bottomRows(hs);
  dgates.middleRows(hs, hs) =
      (drh.array() * s.h_prev.array() * r * (Scalar(1) - r)).matrix();

  g.dh_prev.array() += dh_new.array() * (Scalar(1) - z) + drh.array() * r;
  g.dh_prev.noalias() += p.u.value.topRows(2 * hs).transpose() * dgates.topRows(2 * hs);

  p.w.grad.noalias() += dgates * s.x.transpose();
  p.b.grad.col(0) += dgates.rowwise().sum();
  p.u.grad.topRows(2 * hs).noalias() += dgates.topRows(2 * hs) * s.h_prev.transpose();
  Matrix<Scalar> rh = s.r.cwiseProduct(s.h_prev);
  p.u.grad.bottomRows(hs).noalias() += dgates.bottomRows(hs) * rh.transpose();
  g.dx.noalias() = p.w.value.transpose() * dgates;
  return g;
}

template <typename Scalar>
struct GruTrace {
  std::vector<GruStep<Scalar>> steps;
  const Matrix<Scalar>& last() const { return steps.back().h; }
};

// Folds the cell over xs (each D x B); masks[k], when given, is 1 x B.
template <typename Scalar>
GruTrace<Scalar> gru_sequence(const std::vector<Matrix<Scalar>>& xs, const GruParams<Scalar>& p,
                              const std::type_identity_t<Matrix<Scalar>>& h0,
                              const std::vector<Matrix<Scalar>>* masks = nullptr) {
  if (xs.empty()) throw NumericError("gru_sequence: empty input sequence");
  if (masks && masks->size() != xs.size()) throw NumericError("gru_sequence: mask count mismatch");
  GruTrace<Scalar> trace;
  trace.steps.reserve(xs.size());
  const Matrix<Scalar>* h = &h0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    trace.steps.push_back(gru_cell_forward(xs[k], *h, p, masks ? &(*masks)[k] : nullptr));
    h = &trace.steps.back().h;
  }
  return trace;
}

template <typename Scalar>
struct GruSequenceGrads {
  std::vector<Matrix<Scalar>> dxs;
  Matrix<Scalar> dh0;
};

template <typename Scalar>
GruSequenceGrads<Scalar> gru_backward(const GruTrace<Scalar>& trace, const Matrix<Scalar>& dh_last,
                                      GruParams<Scalar>& p) {
  if (trace.steps.empty()) throw NumericError("gru_backward: empty trace");
  GruSequenceGrads<Scalar> g;
  g.dxs.resize(trace.steps.size());
  Matrix<Scalar> dh = dh_last;
  for (std::size_t k = trace.steps.size(); k-- > 0;) {
    auto step = gru_cell_backward(trace.steps[k], dh, p);
    g.dxs[k] = std::move(step.dx);
    dh = std::move(step.dh_prev);
  }
  g.dh0 = std::move(dh);
  return g;
}

}  // namespace ftmp::nc
