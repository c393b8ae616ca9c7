// SPDX-License-Identifier: Apache-2.0
#include "ftmp/tm_only.hpp"

#include <random>

#include "ftmp/error.hpp"

namespace ftmp {

TmOnlyParams::TmOnlyParams(const TmOnlyDims& d, bool weighted_)
    : dims(d),
      weighted(weighted_),
      move_emb(d.move_dim, kNumTalkMoves + 1),
      gru(d.move_dim, d.move_hidden),
      out(d.move_hidden, kNumTalkMoves) {
  if (d.move_dim < 1 || d.move_hidden < 1) throw ValidationError("model dimensions must be positive");
}

void TmOnlyParams::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nc::fill_uniform(move_emb.value, Real(0.1), rng);
  gru.init(rng);
  out.init(rng);
}

std::vector<NamedParam> TmOnlyParams::named_parameters() {
  return {{"move_emb", &move_emb}, {"gru.w", &gru.w}, {"gru.u", &gru.u},
          {"gru.b", &gru.b},       {"out.w", &out.w}, {"out.b", &out.b}};
}

BatchTmTrace forward_batch(const TmOnlyParams& p, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("forward: empty batch");
  BatchTmTrace tr;
  tr.batch = static_cast<int>(batch.size());
  tr.w = static_cast<int>(batch[0].window.size());
  const int nb = tr.batch, w = tr.w;
  tr.move_ids.resize(static_cast<std::size_t>(w) * nb);
  for (int j = 0; j < w; ++j) {
    Mat x(p.dims.move_dim, nb);
    for (int b = 0; b < nb; ++b) {
      if (static_cast<int>(batch[b].window.size()) != w)
        throw ValidationError("forward: examples in a batch must share the window size");
      const int m = batch[b].window[j].move;
      if (m < 0 || m > kPadMove) throw ValidationError("talk-move index out of range");
      tr.move_ids[j * nb + b] = m;
      x.col(b) = p.move_emb.value.col(m);
    }
    tr.move_x.push_back(std::move(x));
  }
  tr.seq = nc::gru_sequence(tr.move_x, p.gru, Mat::Zero(p.dims.move_hidden, nb));
  tr.logits = p.out.forward(tr.seq.last());
  tr.probs = nc::softmax(tr.logits);
  return tr;
}

Real backward_batch(const BatchTmTrace& tr, std::span<const int> labels, std::span<const Real> coef,
                    TmOnlyParams& p) {
  Mat probs, dlogits;
  const Real loss = nc::softmax_xent_batch(tr.logits, labels, coef, probs, dlogits);
  Mat dh = p.out.backward(tr.seq.last(), dlogits);
  auto g = nc::gru_backward(tr.seq, dh, p.gru);
  for (int j = 0; j < tr.w; ++j)
    for (int b = 0; b < tr.batch; ++b) p.move_emb.grad.col(tr.move_ids[j * tr.batch + b]) += g.dxs[j].col(b);
  return loss;
}

Real TmOnlyModel::accumulate_gradients(std::span<const Example> batch, std::span<const Real> coef) {
  auto tr = forward_batch(params_, batch);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto& e : batch) labels.push_back(index_of(e.label));
  return backward_batch(tr, labels, coef, params_);
}

Mat TmOnlyModel::probabilities(std::span<const Example> batch) const {
  return forward_batch(params_, batch).probs;
}

Mat TmOnlyModel::logits(std::span<const Example> batch) const {
  return forward_batch(params_, batch).logits;
}

}  // namespace ftmp
