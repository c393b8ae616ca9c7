// SPDX-License-Identifier: Apache-2.0
#include "ftmp/windowing.hpp"

#include <ostream>

#include "ftmp/error.hpp"
#include "ftmp/tokenizer.hpp"
#include "json.hpp"

namespace ftmp {

int speaker_change(std::optional<std::string_view> prev, std::string_view cur) {
  return (!prev || *prev != cur) ? 1 : 0;
}

std::vector<Example> extract_examples(const Transcript& transcript, const Vocabulary& vocab,
                                      WindowConfig cfg) {
  if (cfg.w < 1) throw ValidationError("window size must be >= 1");
  const auto& utts = transcript.utterances;
  const std::size_t n = utts.size();
  if (n < 2) return {};

  std::vector<ContextElement> elements;
  elements.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ContextElement c;
    c.speaker_change = speaker_change(
        i == 0 ? std::nullopt : std::optional<std::string_view>(utts[i - 1].speaker_id),
        utts[i].speaker_id);
    c.tokens = vocab.encode(tokenize(utts[i].text));
    c.move = index_of(utts[i].talk_move);
    c.utterance_idx = utts[i].idx;
    elements.push_back(std::move(c));
  }

  const auto w = static_cast<std::size_t>(cfg.w);
  std::vector<Example> out;
  out.reserve(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) {
    Example ex;
    ex.window.reserve(w);
    const std::size_t pads = t + 1 < w ? w - 1 - t : 0;
    ex.window.resize(pads);
    for (std::size_t i = t + 1 - (w - pads); i <= t; ++i) ex.window.push_back(elements[i]);
    ex.label = utts[t + 1].talk_move;
    ex.origin = {transcript.id, t};
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> extract_examples(const Corpus& corpus, Bucket bucket, const Vocabulary& vocab,
                                      WindowConfig cfg) {
  std::vector<Example> out;
  for (const auto* t : corpus.in(bucket)) {
    auto ex = extract_examples(*t, vocab, cfg);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

Example make_example(std::span<const Utterance> context, const Vocabulary& vocab, WindowConfig cfg,
                     bool* truncated) {
  if (cfg.w < 1) throw ValidationError("window size must be >= 1");
  const auto w = static_cast<std::size_t>(cfg.w);
  const std::size_t n = context.size();
  const std::size_t first = n > w ? n - w : 0;
  if (truncated) *truncated = first > 0;
  Example ex;
  ex.window.resize(w - (n - first));
  for (std::size_t i = first; i < n; ++i) {
    validate(context[i]);
    ContextElement c;
    c.speaker_change = speaker_change(
        i == 0 ? std::nullopt : std::optional<std::string_view>(context[i - 1].speaker_id),
        context[i].speaker_id);
    c.tokens = vocab.encode(tokenize(context[i].text));
    c.move = index_of(context[i].talk_move);
    c.utterance_idx = context[i].idx;
    ex.window.push_back(std::move(c));
  }
  ex.origin.position = n == 0 ? 0 : n - 1;
  return ex;
}

std::vector<TalkMove> labels_of(const std::vector<Example>& examples) {
  std::vector<TalkMove> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

void write_examples_jsonl(std::ostream& out, const std::vector<Example>& examples,
                          const Vocabulary& vocab) {
  using nlohmann::json;
  for (const auto& ex : examples) {
    json window = json::array();
    for (const auto& c : ex.window) {
      json toks = json::array();
      for (int id : c.tokens) toks.push_back(vocab.token(id));
      window.push_back({{"s", c.speaker_change},
                        {"tokens", toks},
                        {"move", c.is_pad() ? std::string("<pad>")
                                            : std::string(name_of(talk_move_from_index(c.move)))}});
    }
    json j = {{"transcript_id", ex.origin.transcript_id},
              {"position", ex.origin.position},
              {"window", window},
              {"label", name_of(ex.label)}};
    out << j.dump() << '\n';
  }
}

}  // namespace ftmp
