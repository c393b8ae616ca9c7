// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ftmp/embeddings.hpp"
#include "ftmp/model.hpp"

namespace ftmp {

// Layer sizes of the three-encoder model.
struct Model3EDims {
  int vocab_size = 2;
  int word_dim = 256;
  int utt_hidden = 512;
  int move_dim = 32;
  int move_hidden = 64;
  int dialogue_hidden = 1025;
  int ff_hidden = 32;
  // External embedding widths; 0 disables the corresponding concatenation.
  int ext_utt = 0;
  int ext_ctx = 0;

  int dialogue_input() const { return utt_hidden + 1 + ext_utt; }
  int context_size() const { return dialogue_hidden + move_hidden + ext_ctx; }

  // The tiny gradient-check configuration: word 4, utterance 6, move 3,
  // move hidden 5, feed-forward 4; dialogue hidden is 2 * 6 + 1.
  static Model3EDims tiny(int vocab_size);

  bool operator==(const Model3EDims&) const = default;
};

void validate(const Model3EDims& dims);

struct Model3EParams {
  Model3EDims dims;
  nc::Param<Real> word_emb;  // word_dim x vocab, column per token
  nc::GruParams<Real> utt_gru;
  nc::Param<Real> move_emb;  // move_dim x 9, column kPadMove is padding
  nc::GruParams<Real> move_gru;
  nc::GruParams<Real> dialogue_gru;
  nc::Linear<Real> ff1;  // context -> ff_hidden, tanh
  nc::Linear<Real> ff2;  // ff_hidden -> 8

  Model3EParams() = default;
  explicit Model3EParams(const Model3EDims& dims);

  // Embeddings U(-0.1, 0.1); GRU weights U(-1/sqrt(H), 1/sqrt(H));
  // linear weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases 0.
  void init(std::uint64_t seed);

  std::vector<NamedParam> named_parameters();
};

// Per-batch external inputs: utt[j] is ext_utt x B for window position j,
// ctx is ext_ctx x B.
struct ExternalBatch {
  std::vector<Mat> utt;
  Mat ctx;
};

// Builds the external inputs of a batch from sidecar stores (either may be
// null when that block is disabled). Padding elements get zero vectors.
ExternalBatch gather_external(std::span<const Example> batch, int w, const EmbeddingStore* utt,
                              const EmbeddingStore* ctx);

// Intermediates of a batched forward pass.
struct Batch3ETrace {
  int batch = 0;
  int w = 0;
  // Utterance slots n = j * batch + b, sorted by token count (descending).
  std::vector<int> slot_order;                // sorted position -> slot
  std::vector<std::vector<int>> slot_tokens;  // by sorted position
  std::vector<int> active;                    // columns live at token step k
  std::vector<nc::GruStep<Real>> utt_steps;
  Mat utt_last;                 // utt_hidden x (w*batch), slot order
  std::vector<Mat> dialogue_x;  // a_i per position: dialogue_input x batch
  nc::GruTrace<Real> dialogue;
  std::vector<int> move_ids;  // j * batch + b
  std::vector<Mat> move_x;
  nc::GruTrace<Real> moves;
  Mat context;  // r_t
  Mat hidden;   // tanh(ff1(r_t))
  Mat logits;
  Mat probs;
};

Batch3ETrace forward_batch(const Model3EParams& p, std::span<const Example> batch,
                           const ExternalBatch* ext = nullptr);
// Returns the summed weighted loss and accumulates gradients into p.
Real backward_batch(const Batch3ETrace& trace, std::span<const int> labels,
                    std::span<const Real> coef, Model3EParams& p);

// Single-example view of the forward pass.
struct ForwardTrace {
  Mat utterance;  // â_i, one column per window element
  Mat utterance_with_speaker;  // a_i (or a*_i with external block)
  Vec dialogue;   // b_t
  Vec talk_moves; // d_t
  Vec context;    // r_t
  Vec logits;
  Vec probs;
};

// a_i = cat(â_i, s). Empty token lists are encoded as a single PAD token.
Vec encode_utterance(std::span<const int> tokens, int speaker_change, const Model3EParams& p);
// b_t: last dialogue-GRU state over the w utterance vectors.
Vec encode_dialogue(const std::vector<Vec>& a_seq, const Model3EParams& p);
// d_t: last talk-move-GRU state over move ids (0..7 or kPadMove).
Vec encode_talkmoves(std::span<const int> moves, const Model3EParams& p);

ForwardTrace forward(const Example& example, const Model3EParams& p);
ForwardTrace forward_ext(const Example& example, const Model3EParams& p,
                         const std::vector<Vec>* ext_utt, const Vec* ext_ctx);
TalkMove predict(const Example& example, const Model3EParams& p);

class Model3E final : public Model {
 public:
  explicit Model3E(Model3EParams params) : params_(std::move(params)) {}

  ModelKind kind() const override { return ModelKind::ThreeE; }
  std::unique_ptr<Model> clone() const override { return std::make_unique<Model3E>(*this); }
  std::vector<NamedParam> named_parameters() override { return params_.named_parameters(); }
  Real accumulate_gradients(std::span<const Example> batch, std::span<const Real> coef) override;
  Mat probabilities(std::span<const Example> batch) const override;
  Mat logits(std::span<const Example> batch) const override;

  // Sidecar stores for the external blocks; required when the matching
  // dims are nonzero.
  void set_external(std::shared_ptr<const EmbeddingStore> utt,
                    std::shared_ptr<const EmbeddingStore> ctx);

  Model3EParams& params() { return params_; }
  const Model3EParams& params() const { return params_; }

 private:
  std::optional<ExternalBatch> external_for(std::span<const Example> batch) const;

  Model3EParams params_;
  std::shared_ptr<const EmbeddingStore> ext_utt_, ext_ctx_;
};

}  // namespace ftmp
