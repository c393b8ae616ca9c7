// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftmp/corpus.hpp"

namespace ftmp {

// One context element c_i = (s_i, u_i, t_i). Left-padding elements have
// s = 0, no tokens and move = kPadMove.
struct ContextElement {
  int speaker_change = 0;
  std::vector<int> tokens;
  int move = kPadMove;
  // Source utterance idx, -1 for padding.
  std::int64_t utterance_idx = -1;

  bool is_pad() const { return move == kPadMove; }
  bool operator==(const ContextElement&) const = default;
};

struct ExampleOrigin {
  std::string transcript_id;
  std::size_t position = 0;  // t: index of the last context utterance
  bool operator==(const ExampleOrigin&) const = default;
};

// The w most recent context elements (oldest first) and the next move.
struct Example {
  std::vector<ContextElement> window;
  TalkMove label = TalkMove::None;
  ExampleOrigin origin;
  bool operator==(const Example&) const = default;
};

struct WindowConfig {
  int w = 5;
};

// 1 iff there is no previous speaker or it differs from the current one.
int speaker_change(std::optional<std::string_view> prev, std::string_view cur);

// One example per position t in [0, n-2], labelled with move t+1.
std::vector<Example> extract_examples(const Transcript& transcript, const Vocabulary& vocab,
                                      WindowConfig cfg);
// All examples of one split bucket, in corpus order.
std::vector<Example> extract_examples(const Corpus& corpus, Bucket bucket, const Vocabulary& vocab,
                                      WindowConfig cfg);

// Window for a live context (oldest first, possibly empty). Speaker changes
// are computed over the whole list before keeping the most recent w; sets
// *truncated when items were dropped. Items are validated as utterances.
Example make_example(std::span<const Utterance> context, const Vocabulary& vocab, WindowConfig cfg,
                     bool* truncated = nullptr);

std::vector<TalkMove> labels_of(const std::vector<Example>& examples);

// JSONL dump for inspection; tokens are rendered as strings via vocab.
void write_examples_jsonl(std::ostream& out, const std::vector<Example>& examples,
                          const Vocabulary& vocab);

}  // namespace ftmp
