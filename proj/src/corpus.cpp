// SPDX-License-Identifier: Apache-2.0
#include "ftmp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ftmp/error.hpp"
#include "ftmp/tokenizer.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

std::string_view name_of(Bucket b) {
  switch (b) {
    case Bucket::Train: return "train";
    case Bucket::Dev: return "dev";
    case Bucket::Test: return "test";
  }
  return "?";
}

Bucket parse_bucket(std::string_view name) {
  if (name == "train") return Bucket::Train;
  if (name == "dev") return Bucket::Dev;
  if (name == "test") return Bucket::Test;
  throw ValidationError("unknown split bucket \"" + std::string(name) + "\"");
}

std::vector<const Transcript*> Corpus::in(Bucket b) const {
  std::vector<const Transcript*> out;
  for (const auto& t : transcripts) {
    auto it = split.find(t.id);
    if (it != split.end() && it->second == b) out.push_back(&t);
  }
  return out;
}

const Transcript& Corpus::find(std::string_view id) const {
  for (const auto& t : transcripts)
    if (t.id == id) return t;
  throw ValidationError("unknown transcript id \"" + std::string(id) + "\"");
}

std::size_t Corpus::num_utterances() const {
  std::size_t n = 0;
  for (const auto& t : transcripts) n += t.utterances.size();
  return n;
}

void validate(const Utterance& u) {
  if (u.role == Role::Student && u.talk_move != TalkMove::Wait)
    throw ValidationError("student utterance must carry Wait, got " +
                          std::string(name_of(u.talk_move)));
  if (u.role == Role::Teacher && u.talk_move == TalkMove::Wait)
    throw ValidationError("teacher utterance cannot carry Wait");
}

void validate(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& t : corpus.transcripts) {
    if (!ids.insert(t.id).second) throw ValidationError("duplicate transcript id \"" + t.id + "\"");
    if (t.utterances.empty()) throw ValidationError("transcript \"" + t.id + "\" is empty");
    for (std::size_t i = 0; i < t.utterances.size(); ++i) {
      validate(t.utterances[i]);
      if (i > 0 && t.utterances[i].idx <= t.utterances[i - 1].idx)
        throw ValidationError("transcript \"" + t.id + "\": idx not strictly increasing");
    }
  }
  if (corpus.split.empty()) return;
  if (corpus.split.size() != ids.size())
    throw ValidationError("split manifest does not cover every transcript exactly once");
  for (const auto& [id, bucket] : corpus.split)
    if (!ids.count(id)) throw ValidationError("split manifest names unknown transcript \"" + id + "\"");
}

namespace {

TalkMove parse_label(std::string_view label, bool raw_label_mode, std::size_t line) {
  if (auto m = parse_talk_move(label)) return *m;
  if (raw_label_mode) {
    if (label == "Marking") return TalkMove::Restating;
    if (label == "Context") return TalkMove::Wait;
  }
  throw ValidationError("line " + std::to_string(line) + ": unknown talk-move label \"" +
                        std::string(label) + "\"");
}

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field \"") + key + "\" has the wrong type", line);
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

Corpus parse_corpus(std::istream& in, bool raw_label_mode) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> position;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", line_no);

    auto tid = field<std::string>(j, "transcript_id", line_no);
    Utterance u;
    u.idx = field<std::int64_t>(j, "idx", line_no);
    u.speaker_id = field<std::string>(j, "speaker_id", line_no);
    auto role = parse_role(field<std::string>(j, "role", line_no));
    if (!role) throw ParseError("role must be \"teacher\" or \"student\"", line_no);
    u.role = *role;
    u.text = field<std::string>(j, "text", line_no);
    u.talk_move = parse_label(field<std::string>(j, "label", line_no), raw_label_mode, line_no);
    try {
      validate(u);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }

    auto [it, inserted] = position.try_emplace(tid, corpus.transcripts.size());
    if (inserted) corpus.transcripts.push_back(Transcript{tid, {}});
    auto& t = corpus.transcripts[it->second];
    if (!t.utterances.empty() && u.idx <= t.utterances.back().idx)
      throw ValidationError("line " + std::to_string(line_no) + ": idx " + std::to_string(u.idx) +
                            " not strictly increasing in transcript \"" + tid + "\"");
    t.utterances.push_back(std::move(u));
  }
  if (corpus.transcripts.empty()) throw ValidationError("no transcripts");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, bool raw_label_mode) {
  auto in = open_in(path);
  return parse_corpus(in, raw_label_mode);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& t : corpus.transcripts) {
    for (const auto& u : t.utterances) {
      json j = {{"transcript_id", t.id},     {"idx", u.idx},
                {"speaker_id", u.speaker_id}, {"role", name_of(u.role)},
                {"text", u.text},             {"label", name_of(u.talk_move)}};
      out << j.dump() << '\n';
    }
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_corpus(out, corpus);
}

SplitSizes split_sizes(std::size_t n) {
  auto rounded = [n](std::size_t percent) { return (n * percent + 50) / 100; };
  std::size_t sizes[3] = {rounded(70), rounded(15), rounded(15)};
  std::size_t total = sizes[0] + sizes[1] + sizes[2];
  if (total < n) sizes[0] += n - total;
  // Half-up rounding overshoots by at most one document.
  for (int b = 2; total > n && b >= 0; --b) {
    if (sizes[b] > 0) {
      --sizes[b];
      --total;
    }
  }
  if (n >= 3) {
    for (int b = 1; b < 3; ++b) {
      if (sizes[b] == 0) {
        ++sizes[b];
        --sizes[0];
      }
    }
  }
  return {sizes[0], sizes[1], sizes[2]};
}

Corpus split_corpus(Corpus corpus, std::uint64_t seed) {
  const std::size_t n = corpus.transcripts.size();
  if (n < 3) throw ValidationError("splitting needs at least 3 transcripts, have " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto sizes = split_sizes(n);
  corpus.split.clear();
  for (std::size_t k = 0; k < n; ++k) {
    Bucket b = k < sizes.train ? Bucket::Train
               : k < sizes.train + sizes.dev ? Bucket::Dev
                                             : Bucket::Test;
    corpus.split[corpus.transcripts[order[k]].id] = b;
  }
  return corpus;
}

void save_split(const Corpus& corpus, const std::filesystem::path& path) {
  json j = json::object();
  for (const auto& [id, bucket] : corpus.split) j[id] = name_of(bucket);
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void load_split(Corpus& corpus, const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path.string() + ": split manifest must be a JSON object");
  corpus.split.clear();
  for (const auto& [id, bucket] : j.items()) {
    if (!bucket.is_string()) throw ParseError(path.string() + ": bucket for \"" + id + "\" is not a string");
    corpus.split[id] = parse_bucket(bucket.get<std::string>());
  }
  validate(corpus);
}

void save_corpus_dir(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(corpus, dir / "transcripts.jsonl");
  if (!corpus.split.empty()) save_split(corpus, dir / "split.json");
}

Corpus load_corpus_dir(const std::filesystem::path& dir) {
  auto corpus = load_corpus(dir / "transcripts.jsonl", false);
  if (std::filesystem::exists(dir / "split.json")) load_split(corpus, dir / "split.json");
  return corpus;
}

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
    throw ValidationError("vocabulary must start with <pad>, <unk>");
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.index_.count(tokens[i])) throw ValidationError("duplicate vocabulary token \"" + tokens[i] + "\"");
    v.add(tokens[i]);
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

Vocabulary build_vocab(const Corpus& corpus, int min_freq) {
  if (min_freq < 1) throw ValidationError("min_freq must be >= 1");
  auto train = corpus.in(Bucket::Train);
  if (train.empty()) throw ValidationError("cannot build a vocabulary from an empty training split");

  std::unordered_map<std::string, int> freq;
  for (const auto* t : train)
    for (const auto& u : t->utterances)
      for (auto& tok : tokenize(u.text)) ++freq[tok];

  std::vector<std::pair<std::string, int>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [tok, count] : entries)
    if (count >= min_freq) vocab.add(tok);
  return vocab;
}

}  // namespace ftmp
