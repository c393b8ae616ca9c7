// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ftmp/numcore.hpp"
#include "ftmp/talk_move.hpp"
#include "ftmp/windowing.hpp"

namespace ftmp {

using Real = double;
using Mat = nc::Matrix<Real>;
using Vec = nc::Vector<Real>;

enum class ModelKind { ThreeE, TmOnly };

std::string_view name_of(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct NamedParam {
  std::string name;
  nc::Param<Real>* param;
};

// What the trainer, evaluator and checkpoint code need from a network.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;

  // Canonical order; the checkpoint block order follows it.
  virtual std::vector<NamedParam> named_parameters() = 0;

  // Forward + backward over a batch. Example j contributes coef[j] times its
  // cross-entropy; gradients accumulate into the parameters' grad buffers.
  // Returns the summed weighted loss.
  virtual Real accumulate_gradients(std::span<const Example> batch, std::span<const Real> coef) = 0;

  // 8 x B matrix of next-move probabilities.
  virtual Mat probabilities(std::span<const Example> batch) const = 0;
  // 8 x B pre-softmax scores.
  virtual Mat logits(std::span<const Example> batch) const = 0;

  std::vector<nc::Param<Real>*> parameters();
  // Read-only view of named_parameters().
  std::vector<std::pair<std::string, const nc::Param<Real>*>> const_parameters() const;
  void zero_grad();
  std::size_t num_parameters();
};

// Argmax with ties to the lowest canonical index.
TalkMove predict_from_probs(const Eigen::Ref<const Vec>& probs);
std::vector<TalkMove> predict_all(const Model& model, std::span<const Example> examples,
                                  std::size_t chunk = 256);

}  // namespace ftmp
