// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ftmp/model.hpp"

namespace ftmp {

// Talk-move-only GRU baseline: it never sees utterance text.
struct TmOnlyDims {
  int move_dim = 32;
  int move_hidden = 64;
  bool operator==(const TmOnlyDims&) const = default;
};

struct TmOnlyParams {
  TmOnlyDims dims;
  // Trained with class weights (TM-only-w) or without (TM-only-z). Only
  // recorded here; the forward pass is identical either way.
  bool weighted = true;
  nc::Param<Real> move_emb;  // move_dim x 9
  nc::GruParams<Real> gru;
  nc::Linear<Real> out;  // move_hidden -> 8

  TmOnlyParams() = default;
  explicit TmOnlyParams(const TmOnlyDims& dims, bool weighted = true);

  void init(std::uint64_t seed);
  std::vector<NamedParam> named_parameters();
};

struct BatchTmTrace {
  int batch = 0;
  int w = 0;
  std::vector<int> move_ids;
  std::vector<Mat> move_x;
  nc::GruTrace<Real> seq;
  Mat logits;
  Mat probs;
};

BatchTmTrace forward_batch(const TmOnlyParams& p, std::span<const Example> batch);
Real backward_batch(const BatchTmTrace& trace, std::span<const int> labels,
                    std::span<const Real> coef, TmOnlyParams& p);

class TmOnlyModel final : public Model {
 public:
  explicit TmOnlyModel(TmOnlyParams params) : params_(std::move(params)) {}

  ModelKind kind() const override { return ModelKind::TmOnly; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<TmOnlyModel>(*this); }
  std::vector<NamedParam> named_parameters() override { return params_.named_parameters(); }
  Real accumulate_gradients(std::span<const Example> batch, std::span<const Real> coef) override;
  Mat probabilities(std::span<const Example> batch) const override;
  Mat logits(std::span<const Example> batch) const override;

  TmOnlyParams& params() { return params_; }
  const TmOnlyParams& params() const { return params_; }

 private:
  TmOnlyParams params_;
};

}  // namespace ftmp
