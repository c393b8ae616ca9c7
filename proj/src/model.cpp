// SPDX-License-Identifier: Apache-2.0
#include "ftmp/model.hpp"

#include <algorithm>

#include "ftmp/error.hpp"

namespace ftmp {

std::string_view name_of(ModelKind k) { return k == ModelKind::ThreeE ? "3e" : "tm-only"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "3e" || name == "3-E") return ModelKind::ThreeE;
  if (name == "tm-only" || name == "tmonly") return ModelKind::TmOnly;
  throw ValidationError("unknown model kind \"" + std::string(name) + "\" (expected 3e or tm-only)");
}

std::vector<nc::Param<Real>*> Model::parameters() {
  std::vector<nc::Param<Real>*> out;
  for (auto& np : named_parameters()) out.push_back(np.param);
  return out;
}

std::vector<std::pair<std::string, const nc::Param<Real>*>> Model::const_parameters() const {
  std::vector<std::pair<std::string, const nc::Param<Real>*>> out;
  for (auto& np : const_cast<Model*>(this)->named_parameters()) out.emplace_back(np.name, np.param);
  return out;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::size_t Model::num_parameters() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

TalkMove predict_from_probs(const Eigen::Ref<const Vec>& probs) {
  if (probs.size() != kNumTalkMoves) throw ValidationError("expected 8 probabilities");
  return talk_move_from_index(static_cast<int>(nc::argmax(probs)));
}

std::vector<TalkMove> predict_all(const Model& model, std::span<const Example> examples,
                                  std::size_t chunk) {
  std::vector<TalkMove> out;
  out.reserve(examples.size());
  for (std::size_t start = 0; start < examples.size(); start += chunk) {
    const auto n = std::min(chunk, examples.size() - start);
    Mat probs = model.probabilities(examples.subspan(start, n));
    for (nc::Index j = 0; j < probs.cols(); ++j) out.push_back(predict_from_probs(probs.col(j)));
  }
  return out;
}

}  // namespace ftmp
