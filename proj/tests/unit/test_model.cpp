// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <numeric>
#include <unistd.h>
#include <random>

#include "doctest.h"
#include "ftmp/gradcheck.hpp"
#include "ftmp/model3e.hpp"
#include "ftmp/tm_only.hpp"

using namespace ftmp;

namespace {

Model3E tiny_3e(int vocab, std::uint64_t seed, int ext_utt = 0, int ext_ctx = 0) {
  auto d = Model3EDims::tiny(vocab);
  d.ext_utt = ext_utt;
  d.ext_ctx = ext_ctx;
  Model3EParams p(d);
  p.init(seed);
  return Model3E(std::move(p));
}

TmOnlyModel tiny_tm(std::uint64_t seed, bool weighted = true) {
  TmOnlyParams p(TmOnlyDims{3, 5}, weighted);
  p.init(seed);
  return TmOnlyModel(std::move(p));
}

Example moves_window(std::vector<TalkMove> moves) {
  Example ex;
  for (auto m : moves) {
    ContextElement c;
    c.speaker_change = 1;
    c.tokens = {2, 3};
    c.move = index_of(m);
    c.utterance_idx = static_cast<std::int64_t>(ex.window.size());
    ex.window.push_back(c);
  }
  return ex;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("tiny gradient check covers every parameter of both models") {
  const auto results = tiny_grad_check(0);
  REQUIRE(results.size() == 2);
  for (const auto& r : results) {
    CAPTURE(r.model);
    CAPTURE(r.worst_param);
    CHECK(r.max_rel_error < 1e-5);
    CHECK(r.coords_checked == r.num_params);
  }
}

TEST_CASE("logit differencing agrees with the plain loss difference") {
  const int vocab = 12;
  auto batch = random_examples(6, 3, vocab, 3);
  auto m = tiny_3e(vocab, 4, 0, 0);
  const std::vector<Real> coef = {0.3, 1.0, 1.7, 0.5, 2.0, 0.9};
  auto loss = [&] {
    const Mat p = m.probabilities(batch);
    Real l = 0;
    for (std::size_t j = 0; j < batch.size(); ++j)
      l -= coef[j] * std::log(p(index_of(batch[j].label), static_cast<Eigen::Index>(j)));
    return l;
  };
  m.zero_grad();
  m.accumulate_gradients(batch, coef);
  auto& ff2 = *m.named_parameters().back().param;
  // Large steps so cancellation noise is negligible next to the difference.
  for (Real h : {1e-2, 1e-1}) {
    const Real saved = ff2.value(0, 0);
    ff2.value(0, 0) = saved + h;
    const Real up = loss();
    ff2.value(0, 0) = saved - h;
    const Real down = loss();
    ff2.value(0, 0) = saved;
    const Real plain = (up - down) / (2 * h);
    CHECK(plain == doctest::Approx(ff2.grad(0, 0)).epsilon(10 * h * h));
  }
  const auto r = grad_check_model(m, batch, coef);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("gradient check with external embedding blocks") {
  const int vocab = 12, w = 3;
  auto batch = random_examples(5, w, vocab, 9);
  auto utt = std::make_shared<EmbeddingStore>(2);
  auto ctx = std::make_shared<EmbeddingStore>(3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (const auto& ex : batch) {
    for (const auto& c : ex.window)
      if (!c.is_pad()) utt->put(embedding_key(ex.origin.transcript_id, c.utterance_idx), Eigen::Vector2d(g(rng), g(rng)));
    ctx->put(embedding_key(ex.origin.transcript_id, ex.window.back().utterance_idx),
             Eigen::Vector3d(g(rng), g(rng), g(rng)));
  }
  auto m = tiny_3e(vocab, 3, 2, 3);
  m.set_external(utt, ctx);
  const std::vector<Real> coef(batch.size(), 0.7);
  const auto r = grad_check_model(m, batch, coef);
  CHECK(r.max_rel_error < 1e-5);

  SUBCASE("batched path equals the single-example path") {
    const Mat probs = m.probabilities(batch);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      std::vector<Vec> eu;
      for (const auto& c : batch[j].window)
        eu.push_back(c.is_pad() ? Vec(Vec::Zero(2)) : utt->at(embedding_key(batch[j].origin.transcript_id, c.utterance_idx)));
      const Vec ec = ctx->at(embedding_key(batch[j].origin.transcript_id, batch[j].window.back().utterance_idx));
      const auto tr = forward_ext(batch[j], m.params(), &eu, &ec);
      CHECK((tr.probs - probs.col(static_cast<Eigen::Index>(j))).norm() < 1e-13);
    }
  }
  SUBCASE("missing store is an error") {
    auto bare = tiny_3e(vocab, 3, 2, 3);
    CHECK_THROWS_AS(bare.probabilities(batch), ValidationError);
  }
}

TEST_CASE("batched probabilities equal per-example forward passes") {
  auto m = tiny_3e(12, 5);
  const auto batch = random_examples(9, 4, 12, 6);
  const Mat probs = m.probabilities(batch);
  REQUIRE(probs.rows() == kNumTalkMoves);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto tr = forward(batch[j], m.params());
    const auto col = static_cast<Eigen::Index>(j);
    CHECK((tr.probs - probs.col(col)).norm() < 1e-13);
    CHECK(probs.col(col).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tr.context.size() == m.params().dims.context_size());
    CHECK(predict(batch[j], m.params()) == predict_from_probs(probs.col(col)));
  }
}

TEST_CASE("forward trace pieces compose") {
  auto m = tiny_3e(12, 8);
  const auto ex = random_examples(1, 4, 12, 10)[0];
  const auto tr = forward(ex, m.params());
  std::vector<Vec> a;
  std::vector<int> moves;
  for (const auto& c : ex.window) {
    a.push_back(encode_utterance(c.tokens, c.speaker_change, m.params()));
    moves.push_back(c.move);
  }
  const Vec b = encode_dialogue(a, m.params());
  const Vec d = encode_talkmoves(moves, m.params());
  CHECK((tr.dialogue - b).norm() < 1e-14);
  CHECK((tr.talk_moves - d).norm() < 1e-14);
  CHECK(tr.context.head(b.size()) == b);
  CHECK(tr.context.tail(d.size()) == d);
  // a_i ends with the speaker flag.
  CHECK(a[0](a[0].size() - 1) == ex.window[0].speaker_change);
}

TEST_CASE("an empty utterance encodes like a lone padding token") {
  auto m = tiny_3e(12, 2);
  const std::vector<int> none, pad = {Vocabulary::kPad};
  CHECK((encode_utterance(none, 1, m.params()) - encode_utterance(pad, 1, m.params())).norm() == 0.0);
}

TEST_CASE("all-padding windows give a valid distribution") {
  auto m = tiny_3e(12, 2);
  Example ex;
  ex.window.resize(5);
  const Mat p = m.probabilities(std::span<const Example>(&ex, 1));
  CHECK(p.col(0).sum() == doctest::Approx(1.0));
  CHECK((p.array() > 0).all());
}

TEST_CASE("talk-move order matters") {
  using enum TalkMove;
  const auto a = moves_window({Wait, Wait, Wait, Wait, PressForAccuracy});
  const auto b = moves_window({PressForAccuracy, Wait, Wait, Wait, Wait});
  auto tm = tiny_tm(1);
  auto m3 = tiny_3e(12, 1);
  const std::vector<Example> both = {a, b};
  const Mat ptm = tm.probabilities(both), p3 = m3.probabilities(both);
  CHECK((ptm.col(0) - ptm.col(1)).norm() > 1e-6);
  CHECK((p3.col(0) - p3.col(1)).norm() > 1e-6);
}

TEST_CASE("weighted and unweighted TM-only share the forward pass") {
  auto w = tiny_tm(4, true), z = tiny_tm(4, false);
  const auto batch = random_examples(6, 5, 12, 2);
  CHECK((w.probabilities(batch) - z.probabilities(batch)).norm() == 0.0);
}

TEST_CASE("initialisation is seeded") {
  auto a = tiny_3e(12, 42), b = tiny_3e(12, 42), c = tiny_3e(12, 43);
  auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
  bool differs = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k].param->value == pb[k].param->value);
    differs = differs || pa[k].param->value != pc[k].param->value;
  }
  CHECK(differs);
}

TEST_CASE("full-size dimensions") {
  Model3EDims d;
  d.vocab_size = 100;
  Model3EParams p(d);
  CHECK(p.word_emb.rows() == 256);
  CHECK(p.utt_gru.hidden_size() == 512);
  CHECK(p.dialogue_gru.input_size() == 513);
  CHECK(p.dialogue_gru.hidden_size() == 1025);
  CHECK(p.move_emb.rows() == 32);
  CHECK(p.move_emb.cols() == 9);
  CHECK(p.move_gru.hidden_size() == 64);
  CHECK(p.ff1.in_size() == 1025 + 64);
  CHECK(p.ff1.out_size() == 32);
  CHECK(p.ff2.out_size() == 8);

  std::vector<std::string> names;
  for (const auto& np : p.named_parameters()) names.push_back(np.name);
  CHECK(names == std::vector<std::string>{"word_emb", "utt_gru.w", "utt_gru.u", "utt_gru.b", "move_emb",
                                          "move_gru.w", "move_gru.u", "move_gru.b", "dialogue_gru.w",
                                          "dialogue_gru.u", "dialogue_gru.b", "ff1.w", "ff1.b", "ff2.w", "ff2.b"});
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(Model3EParams(Model3EDims::tiny(1)), ValidationError);
  auto m = tiny_3e(12, 1);
  auto batch = random_examples(2, 3, 12, 1);
  batch[1].window.pop_back();
  CHECK_THROWS_AS(m.probabilities(batch), ValidationError);
  CHECK_THROWS_AS(m.probabilities(std::span<const Example>{}), ValidationError);
}

TEST_CASE("accumulated loss equals the weighted cross-entropy of the probabilities") {
  auto m = tiny_3e(12, 3);
  const auto batch = random_examples(7, 3, 12, 4);
  std::vector<Real> coef = {0.5, 1, 2, 0, 1, 1, 3};
  const Mat p = m.probabilities(batch);
  double want = 0;
  for (std::size_t j = 0; j < batch.size(); ++j)
    want -= coef[j] * std::log(p(index_of(batch[j].label), static_cast<Eigen::Index>(j)));
  m.zero_grad();
  CHECK(m.accumulate_gradients(batch, coef) == doctest::Approx(want).epsilon(1e-12));
}

}
