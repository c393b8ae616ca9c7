// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ftmp/corpus.hpp"
#include "ftmp/windowing.hpp"

namespace ftmp {

// Uniform over the eight moves.
class RandomBaseline {
 public:
  explicit RandomBaseline(std::uint64_t seed) : rng_(seed) {}
  TalkMove predict();
  std::vector<TalkMove> predict(std::size_t n);

 private:
  std::mt19937_64 rng_;
  std::uniform_int_distribution<int> dist_{0, kNumTalkMoves - 1};
};

// Most frequent label; ties go to the lowest index.
TalkMove majority_fit(std::span<const TalkMove> labels);

// Row kStartRow is the transcript-start sentinel.
struct BigramTable {
  static constexpr int kRows = kNumTalkMoves + 1;
  static constexpr int kStartRow = kNumTalkMoves;

  std::array<std::array<std::int64_t, kNumTalkMoves>, kRows> counts{};
  std::array<std::array<double, kNumTalkMoves>, kRows> probs{};
  std::array<bool, kRows> seen{};
  // Fallback for unseen rows.
  TalkMove majority = TalkMove::None;

  // Row argmax; unseen row -> majority. prev = nullopt is the start row.
  TalkMove predict(std::optional<TalkMove> prev) const;
  // The previous move is the last non-pad window element.
  TalkMove predict(const Example& example) const;
};

// Counts (t_i -> t_{i+1}) over every utterance of every transcript, plus
// (start -> t_0). The fallback majority is over the counted next moves.
BigramTable tmbm_fit(std::span<const Transcript* const> transcripts);
BigramTable tmbm_fit(const Corpus& corpus, Bucket bucket);

// 9 x 8 CSV with a header row of canonical labels; the first column names
// the previous move ("<start>" for the sentinel row).
void write_bigram_csv(std::ostream& out, const BigramTable& table);

}  // namespace ftmp
