// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ftmp/numcore/tensor.hpp"

namespace ftmp::nc {

struct GradCheckOptions {
  double eps = 1e-5;
  // Parameters with more coordinates than this are checked on a seeded
  // random subset of this size.
  Index max_coords_per_param = 4096;
  // Denominator floor so coordinates with (near-)zero gradient compare by
  // absolute error.
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_coord = 0;
  std::size_t coords_checked = 0;
};

// Compares the analytic gradients already stored in params[k]->grad with
// central differences. eval() returns some state of the model and
// diff(up, down) the loss difference between two states; working on a
// state finer than the scalar loss keeps cancellation error out of small
// gradients. Neither may modify gradients.
template <typename Scalar, typename Eval, typename Diff>
GradCheckResult grad_check_diff(Eval&& eval, Diff&& diff, std::span<Param<Scalar>* const> params,
                                const GradCheckOptions& opt = {}) {
  GradCheckResult res;
  std::mt19937_64 rng(opt.seed);
  const Scalar eps = static_cast<Scalar>(opt.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    std::vector<Index> coords(p.size());
    for (Index i = 0; i < p.size(); ++i) coords[i] = i;
    if (p.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_param);
    }
    for (Index c : coords) {
      Scalar& x = p.value.data()[c];
      const Scalar saved = x;
      x = saved + eps;
      const auto up = eval();
      x = saved - eps;
      const auto down = eval();
      x = saved;
      const double numeric = static_cast<double>(diff(up, down) / (Scalar(2) * eps));
      const double analytic = static_cast<double>(p.grad.data()[c]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), opt.floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++res.coords_checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = k;
        res.worst_coord = c;
      }
    }
  }
  return res;
}

// Same, differencing a scalar loss directly.
template <typename Scalar>
GradCheckResult grad_check(const std::function<Scalar()>& loss, std::span<Param<Scalar>* const> params,
                           const GradCheckOptions& opt = {}) {
  return grad_check_diff<Scalar>(loss, [](Scalar a, Scalar b) { return a - b; }, params, opt);
}

}  // namespace ftmp::nc
