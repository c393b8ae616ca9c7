// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftmp/numcore/tensor.hpp"

namespace ftmp::nc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments are created lazily on the first step
// and are tied to the parameter order passed to step().
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.lr > 0)) throw NumericError("adam: learning rate must be positive");
  }

  void step(std::span<Param<Scalar>* const> params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw NumericError("adam: parameter list changed");
    ++t_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    const Scalar lr = static_cast<Scalar>(cfg_.lr), eps = static_cast<Scalar>(cfg_.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      check_finite(p.grad, "gradient");
      m_[k] = b1 * m_[k] + (Scalar(1) - b1) * p.grad;
      v_[k] = b2 * v_[k] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps);
    }
  }

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix<Scalar>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace ftmp::nc
