// SPDX-License-Identifier: Apache-2.0
#include "ftmp/model3e.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ftmp/error.hpp"

namespace ftmp {

Model3EDims Model3EDims::tiny(int vocab_size) {
  Model3EDims d;
  d.vocab_size = vocab_size;
  d.word_dim = 4;
  d.utt_hidden = 6;
  d.move_dim = 3;
  d.move_hidden = 5;
  d.dialogue_hidden = 2 * d.utt_hidden + 1;
  d.ff_hidden = 4;
  return d;
}

void validate(const Model3EDims& d) {
  if (d.vocab_size < 2) throw ValidationError("vocab_size must be >= 2 (PAD, UNK)");
  if (d.word_dim < 1 || d.utt_hidden < 1 || d.move_dim < 1 || d.move_hidden < 1 ||
      d.dialogue_hidden < 1 || d.ff_hidden < 1)
    throw ValidationError("model dimensions must be positive");
  if (d.ext_utt < 0 || d.ext_ctx < 0) throw ValidationError("external dims must be >= 0");
}

Model3EParams::Model3EParams(const Model3EDims& d)
    : dims(d),
      word_emb(d.word_dim, d.vocab_size),
      utt_gru(d.word_dim, d.utt_hidden),
      move_emb(d.move_dim, kNumTalkMoves + 1),
      move_gru(d.move_dim, d.move_hidden),
      dialogue_gru(d.dialogue_input(), d.dialogue_hidden),
      ff1(d.context_size(), d.ff_hidden),
      ff2(d.ff_hidden, kNumTalkMoves) {
  validate(d);
}

void Model3EParams::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nc::fill_uniform(word_emb.value, Real(0.1), rng);
  utt_gru.init(rng);
  nc::fill_uniform(move_emb.value, Real(0.1), rng);
  move_gru.init(rng);
  dialogue_gru.init(rng);
  ff1.init(rng);
  ff2.init(rng);
}

std::vector<NamedParam> Model3EParams::named_parameters() {
  return {{"word_emb", &word_emb},         {"utt_gru.w", &utt_gru.w},
          {"utt_gru.u", &utt_gru.u},       {"utt_gru.b", &utt_gru.b},
          {"move_emb", &move_emb},         {"move_gru.w", &move_gru.w},
          {"move_gru.u", &move_gru.u},     {"move_gru.b", &move_gru.b},
          {"dialogue_gru.w", &dialogue_gru.w}, {"dialogue_gru.u", &dialogue_gru.u},
          {"dialogue_gru.b", &dialogue_gru.b}, {"ff1.w", &ff1.w},
          {"ff1.b", &ff1.b},               {"ff2.w", &ff2.w},
          {"ff2.b", &ff2.b}};
}

ExternalBatch gather_external(std::span<const Example> batch, int w, const EmbeddingStore* utt,
                              const EmbeddingStore* ctx) {
  ExternalBatch ext;
  const auto n = static_cast<nc::Index>(batch.size());
  if (utt) {
    ext.utt.assign(w, Mat::Zero(utt->dim(), n));
    for (nc::Index b = 0; b < n; ++b)
      for (int j = 0; j < w; ++j) {
        const auto& c = batch[b].window[j];
        if (!c.is_pad())
          ext.utt[j].col(b) = utt->at(embedding_key(batch[b].origin.transcript_id, c.utterance_idx));
      }
  }
  if (ctx) {
    ext.ctx = Mat::Zero(ctx->dim(), n);
    for (nc::Index b = 0; b < n; ++b)
      ext.ctx.col(b) =
          ctx->at(embedding_key(batch[b].origin.transcript_id, batch[b].window.back().utterance_idx));
  }
  return ext;
}

Batch3ETrace forward_batch(const Model3EParams& p, std::span<const Example> batch,
                           const ExternalBatch* ext) {
  const auto& d = p.dims;
  if (batch.empty()) throw ValidationError("forward: empty batch");
  Batch3ETrace tr;
  tr.batch = static_cast<int>(batch.size());
  tr.w = static_cast<int>(batch[0].window.size());
  const int nb = tr.batch, w = tr.w;
  if (w < 1) throw ValidationError("forward: empty context window");
  for (const auto& ex : batch)
    if (static_cast<int>(ex.window.size()) != w)
      throw ValidationError("forward: examples in a batch must share the window size");

  const bool has_ext_utt = ext && !ext->utt.empty();
  const bool has_ext_ctx = ext && ext->ctx.size() > 0;
  if (d.ext_utt > 0 && !has_ext_utt) throw ValidationError("model expects external utterance embeddings");
  if (d.ext_ctx > 0 && !has_ext_ctx) throw ValidationError("model expects external context embeddings");
  if (d.ext_utt == 0 && has_ext_utt)
    throw ValidationError("external utterance embeddings given but not configured");
  if (d.ext_ctx == 0 && has_ext_ctx)
    throw ValidationError("external context embeddings given but not configured");
  if (has_ext_utt) {
    if (static_cast<int>(ext->utt.size()) != w) throw ValidationError("external utterance block: wrong window");
    for (const auto& m : ext->utt)
      if (m.rows() != d.ext_utt || m.cols() != nb)
        throw ValidationError("external utterance embedding dimension mismatch");
  }
  if (has_ext_ctx && (ext->ctx.rows() != d.ext_ctx || ext->ctx.cols() != nb))
    throw ValidationError("external context embedding dimension mismatch");

  // Utterance encoder over packed (length-sorted) slots.
  const int n_slots = w * nb;
  std::vector<std::vector<int>> tokens(n_slots);
  for (int j = 0; j < w; ++j)
    for (int b = 0; b < nb; ++b) {
      auto& t = tokens[j * nb + b];
      const auto& src = batch[b].window[j].tokens;
      t.assign(src.begin(), src.end());
      if (t.empty()) t.push_back(Vocabulary::kPad);
      for (int id : t)
        if (id < 0 || id >= d.vocab_size)
          throw ValidationError("token index " + std::to_string(id) + " outside vocabulary");
    }
  tr.slot_order.resize(n_slots);
  std::iota(tr.slot_order.begin(), tr.slot_order.end(), 0);
  std::stable_sort(tr.slot_order.begin(), tr.slot_order.end(),
                   [&](int a, int b) { return tokens[a].size() > tokens[b].size(); });
  tr.slot_tokens.reserve(n_slots);
  for (int s : tr.slot_order) tr.slot_tokens.push_back(std::move(tokens[s]));
  const int max_len = static_cast<int>(tr.slot_tokens.front().size());
  for (int k = 0; k < max_len; ++k) {
    int a = 0;
    while (a < n_slots && static_cast<int>(tr.slot_tokens[a].size()) > k) ++a;
    tr.active.push_back(a);
  }

  Mat h = Mat::Zero(d.utt_hidden, n_slots);
  tr.utt_steps.reserve(max_len);
  for (int k = 0; k < max_len; ++k) {
    const int a = tr.active[k];
    Mat x(d.word_dim, a);
    for (int c = 0; c < a; ++c) x.col(c) = p.word_emb.value.col(tr.slot_tokens[c][k]);
    Mat h_prev = h.leftCols(a);
    tr.utt_steps.push_back(nc::gru_cell_forward(x, h_prev, p.utt_gru));
    h.leftCols(a) = tr.utt_steps.back().h;
  }
  tr.utt_last.resize(d.utt_hidden, n_slots);
  for (int c = 0; c < n_slots; ++c) tr.utt_last.col(tr.slot_order[c]) = h.col(c);

  // Dialogue encoder over a_i = cat(â_i, s_i[, ext_i]).
  tr.dialogue_x.reserve(w);
  for (int j = 0; j < w; ++j) {
    Mat a(d.dialogue_input(), nb);
    a.topRows(d.utt_hidden) = tr.utt_last.middleCols(j * nb, nb);
    for (int b = 0; b < nb; ++b) a(d.utt_hidden, b) = batch[b].window[j].speaker_change;
    if (d.ext_utt > 0) a.bottomRows(d.ext_utt) = ext->utt[j];
    tr.dialogue_x.push_back(std::move(a));
  }
  tr.dialogue = nc::gru_sequence(tr.dialogue_x, p.dialogue_gru, Mat::Zero(d.dialogue_hidden, nb));

  // Talk-move encoder.
  tr.move_ids.resize(n_slots);
  tr.move_x.reserve(w);
  for (int j = 0; j < w; ++j) {
    Mat x(d.move_dim, nb);
    for (int b = 0; b < nb; ++b) {
      const int m = batch[b].window[j].move;
      if (m < 0 || m > kPadMove) throw ValidationError("talk-move index out of range");
      tr.move_ids[j * nb + b] = m;
      x.col(b) = p.move_emb.value.col(m);
    }
    tr.move_x.push_back(std::move(x));
  }
  tr.moves = nc::gru_sequence(tr.move_x, p.move_gru, Mat::Zero(d.move_hidden, nb));

  tr.context.resize(d.context_size(), nb);
  tr.context.topRows(d.dialogue_hidden) = tr.dialogue.last();
  tr.context.middleRows(d.dialogue_hidden, d.move_hidden) = tr.moves.last();
  if (d.ext_ctx > 0) tr.context.bottomRows(d.ext_ctx) = ext->ctx;

  tr.hidden = p.ff1.forward(tr.context).array().tanh().matrix();
  tr.logits = p.ff2.forward(tr.hidden);
  tr.probs = nc::softmax(tr.logits);
  return tr;
}

Real backward_batch(const Batch3ETrace& tr, std::span<const int> labels, std::span<const Real> coef,
                    Model3EParams& p) {
  const auto& d = p.dims;
  const int nb = tr.batch, w = tr.w;
  Mat probs, dlogits;
  const Real loss = nc::softmax_xent_batch(tr.logits, labels, coef, probs, dlogits);

  Mat dhidden = p.ff2.backward(tr.hidden, dlogits);
  Mat dpre = (dhidden.array() * (Real(1) - tr.hidden.array().square())).matrix();
  Mat dcontext = p.ff1.backward(tr.context, dpre);

  auto gm = nc::gru_backward(tr.moves, Mat(dcontext.middleRows(d.dialogue_hidden, d.move_hidden)),
                             p.move_gru);
  for (int j = 0; j < w; ++j)
    for (int b = 0; b < nb; ++b) p.move_emb.grad.col(tr.move_ids[j * nb + b]) += gm.dxs[j].col(b);

  auto gd = nc::gru_backward(tr.dialogue, Mat(dcontext.topRows(d.dialogue_hidden)), p.dialogue_gru);
  const int n_slots = w * nb;
  Mat dh(d.utt_hidden, n_slots);
  for (int c = 0; c < n_slots; ++c) {
    const int s = tr.slot_order[c];
    dh.col(c) = gd.dxs[s / nb].col(s % nb).topRows(d.utt_hidden);
  }
  for (int k = static_cast<int>(tr.utt_steps.size()); k-- > 0;) {
    const int a = tr.active[k];
    auto g = nc::gru_cell_backward(tr.utt_steps[k], Mat(dh.leftCols(a)), p.utt_gru);
    dh.leftCols(a) = g.dh_prev;
    for (int c = 0; c < a; ++c) p.word_emb.grad.col(tr.slot_tokens[c][k]) += g.dx.col(c);
  }
  return loss;
}

Vec encode_utterance(std::span<const int> tokens, int speaker_change, const Model3EParams& p) {
  const auto& d = p.dims;
  std::vector<Mat> xs;
  std::vector<int> ids(tokens.begin(), tokens.end());
  if (ids.empty()) ids.push_back(Vocabulary::kPad);
  for (int id : ids) {
    if (id < 0 || id >= d.vocab_size)
      throw ValidationError("token index " + std::to_string(id) + " outside vocabulary");
    xs.push_back(p.word_emb.value.col(id));
  }
  auto trace = nc::gru_sequence(xs, p.utt_gru, Mat::Zero(d.utt_hidden, 1));
  Vec a(d.utt_hidden + 1);
  a.head(d.utt_hidden) = trace.last().col(0);
  a(d.utt_hidden) = speaker_change;
  return a;
}

Vec encode_dialogue(const std::vector<Vec>& a_seq, const Model3EParams& p) {
  std::vector<Mat> xs(a_seq.begin(), a_seq.end());
  auto trace = nc::gru_sequence(xs, p.dialogue_gru, Mat::Zero(p.dims.dialogue_hidden, 1));
  return trace.last().col(0);
}

Vec encode_talkmoves(std::span<const int> moves, const Model3EParams& p) {
  std::vector<Mat> xs;
  for (int m : moves) {
    if (m < 0 || m > kPadMove) throw ValidationError("talk-move index out of range");
    xs.push_back(p.move_emb.value.col(m));
  }
  auto trace = nc::gru_sequence(xs, p.move_gru, Mat::Zero(p.dims.move_hidden, 1));
  return trace.last().col(0);
}

ForwardTrace forward_ext(const Example& example, const Model3EParams& p,
                         const std::vector<Vec>* ext_utt, const Vec* ext_ctx) {
  const int w = static_cast<int>(example.window.size());
  ExternalBatch ext;
  if (ext_utt) {
    if (static_cast<int>(ext_utt->size()) != w)
      throw ValidationError("external utterance embeddings: expected one vector per window element");
    for (const auto& v : *ext_utt) ext.utt.push_back(v);
  }
  if (ext_ctx) ext.ctx = *ext_ctx;
  const bool any = ext_utt || ext_ctx;
  auto tr = forward_batch(p, std::span<const Example>(&example, 1), any ? &ext : nullptr);

  ForwardTrace out;
  out.utterance = tr.utt_last;
  out.utterance_with_speaker.resize(p.dims.dialogue_input(), w);
  for (int j = 0; j < w; ++j) out.utterance_with_speaker.col(j) = tr.dialogue_x[j].col(0);
  out.dialogue = tr.dialogue.last().col(0);
  out.talk_moves = tr.moves.last().col(0);
  out.context = tr.context.col(0);
  out.logits = tr.logits.col(0);
  out.probs = tr.probs.col(0);
  return out;
}

ForwardTrace forward(const Example& example, const Model3EParams& p) {
  return forward_ext(example, p, nullptr, nullptr);
}

TalkMove predict(const Example& example, const Model3EParams& p) {
  return predict_from_probs(forward(example, p).probs);
}

void Model3E::set_external(std::shared_ptr<const EmbeddingStore> utt,
                           std::shared_ptr<const EmbeddingStore> ctx) {
  if (utt && utt->dim() != params_.dims.ext_utt)
    throw ValidationError("utterance sidecar dimension does not match the model");
  if (ctx && ctx->dim() != params_.dims.ext_ctx)
    throw ValidationError("context sidecar dimension does not match the model");
  ext_utt_ = std::move(utt);
  ext_ctx_ = std::move(ctx);
}

std::optional<ExternalBatch> Model3E::external_for(std::span<const Example> batch) const {
  if (params_.dims.ext_utt == 0 && params_.dims.ext_ctx == 0) return std::nullopt;
  if ((params_.dims.ext_utt > 0 && !ext_utt_) || (params_.dims.ext_ctx > 0 && !ext_ctx_))
    throw ValidationError("model needs external embedding sidecars; none attached");
  return gather_external(batch, static_cast<int>(batch.front().window.size()), ext_utt_.get(),
                         ext_ctx_.get());
}

Real Model3E::accumulate_gradients(std::span<const Example> batch, std::span<const Real> coef) {
  auto ext = external_for(batch);
  auto tr = forward_batch(params_, batch, ext ? &*ext : nullptr);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto& e : batch) labels.push_back(index_of(e.label));
  return backward_batch(tr, labels, coef, params_);
}

Mat Model3E::probabilities(std::span<const Example> batch) const {
  auto ext = external_for(batch);
  return forward_batch(params_, batch, ext ? &*ext : nullptr).probs;
}

Mat Model3E::logits(std::span<const Example> batch) const {
  auto ext = external_for(batch);
  return forward_batch(params_, batch, ext ? &*ext : nullptr).logits;
}

}  // namespace ftmp
