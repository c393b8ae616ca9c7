// SPDX-License-Identifier: Apache-2.0
#include "ftmp/baselines.hpp"

#include <algorithm>
#include <ostream>

#include "ftmp/error.hpp"

namespace ftmp {

TalkMove RandomBaseline::predict() { return talk_move_from_index(dist_(rng_)); }

std::vector<TalkMove> RandomBaseline::predict(std::size_t n) {
  std::vector<TalkMove> out(n);
  for (auto& m : out) m = predict();
  return out;
}

TalkMove majority_fit(std::span<const TalkMove> labels) {
  if (labels.empty()) throw ValidationError("majority baseline: no training labels");
  std::array<std::int64_t, kNumTalkMoves> counts{};
  for (auto m : labels) ++counts[index_of(m)];
  // max_element returns the first maximum, i.e. the lowest index.
  return talk_move_from_index(static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
}

TalkMove BigramTable::predict(std::optional<TalkMove> prev) const {
  const int row = prev ? index_of(*prev) : kStartRow;
  if (!seen[row]) return majority;
  const auto& p = probs[row];
  return talk_move_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
}

TalkMove BigramTable::predict(const Example& example) const {
  for (auto it = example.window.rbegin(); it != example.window.rend(); ++it)
    if (!it->is_pad()) return predict(talk_move_from_index(it->move));
  return predict(std::nullopt);
}

BigramTable tmbm_fit(std::span<const Transcript* const> transcripts) {
  BigramTable t;
  std::vector<TalkMove> next_moves;
  for (const auto* tr : transcripts) {
    int prev = BigramTable::kStartRow;
    for (const auto& u : tr->utterances) {
      ++t.counts[prev][index_of(u.talk_move)];
      prev = index_of(u.talk_move);
      next_moves.push_back(u.talk_move);
    }
  }
  if (next_moves.empty()) throw ValidationError("bigram baseline: no training utterances");
  t.majority = majority_fit(next_moves);
  for (int r = 0; r < BigramTable::kRows; ++r) {
    std::int64_t total = 0;
    for (auto c : t.counts[r]) total += c;
    t.seen[r] = total > 0;
    for (int k = 0; k < kNumTalkMoves; ++k)
      t.probs[r][k] = total > 0 ? static_cast<double>(t.counts[r][k]) / static_cast<double>(total) : 0.0;
  }
  return t;
}

BigramTable tmbm_fit(const Corpus& corpus, Bucket bucket) {
  const auto docs = corpus.in(bucket);
  return tmbm_fit(std::span<const Transcript* const>(docs));
}

void write_bigram_csv(std::ostream& out, const BigramTable& table) {
  out << "prev";
  for (auto m : kAllTalkMoves) out << ',' << name_of(m);
  out << '\n';
  for (int r = 0; r < BigramTable::kRows; ++r) {
    out << (r == BigramTable::kStartRow ? std::string("<start>") : std::string(name_of(talk_move_from_index(r))));
    for (auto c : table.counts[r]) out << ',' << c;
    out << '\n';
  }
}

}  // namespace ftmp
