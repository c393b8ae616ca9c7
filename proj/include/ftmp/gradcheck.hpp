// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ftmp/model.hpp"

namespace ftmp {

struct ModelGradCheck {
  std::string model;
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t coords_checked = 0;
  std::size_t num_params = 0;
};

// Analytic gradients of sum_j coef[j] * xent_j against central differences
// of the same loss, differenced through the logits.
ModelGradCheck grad_check_model(Model& model, std::span<const Example> batch, std::span<const Real> coef,
                                double eps = 1e-5, std::uint64_t seed = 0);

// Random windows over a small vocabulary: some left padding, empty and
// repeated-token utterances, random speaker flags and labels.
std::vector<Example> random_examples(int n, int w, int vocab_size, std::uint64_t seed);

// The tiny configuration (vocab 12, w = 3) for 3-E and TM-only, every
// coordinate checked.
std::vector<ModelGradCheck> tiny_grad_check(std::uint64_t seed = 0, double eps = 1e-5);

}  // namespace ftmp
