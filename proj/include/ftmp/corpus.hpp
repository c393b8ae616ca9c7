// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ftmp/talk_move.hpp"

namespace ftmp {

struct Utterance {
  std::string speaker_id;
  Role role = Role::Teacher;
  std::string text;
  TalkMove talk_move = TalkMove::None;
  // Position key from the source file; strictly increasing per transcript.
  std::int64_t idx = 0;

  bool operator==(const Utterance&) const = default;
};

struct Transcript {
  std::string id;
  std::vector<Utterance> utterances;

  bool operator==(const Transcript&) const = default;
};

enum class Bucket : std::uint8_t { Train, Dev, Test };

std::string_view name_of(Bucket b);
Bucket parse_bucket(std::string_view name);

struct Corpus {
  std::vector<Transcript> transcripts;
  // transcript id -> bucket; empty until split_corpus (or a manifest) fills it.
  std::map<std::string, Bucket> split;

  std::vector<const Transcript*> in(Bucket b) const;
  const Transcript& find(std::string_view id) const;
  std::size_t num_utterances() const;

  bool operator==(const Corpus&) const = default;
};

// Throws ValidationError on role/label inconsistency or duplicate ids.
void validate(const Utterance& u);
void validate(const Corpus& corpus);

// Transcript JSONL. With raw_label_mode the original annotation alphabet is
// accepted and "Marking" -> Restating, "Context" -> Wait are merged;
// otherwise only the eight canonical labels are.
Corpus parse_corpus(std::istream& in, bool raw_label_mode = true);
Corpus load_corpus(const std::filesystem::path& path, bool raw_label_mode = true);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitSizes {
  std::size_t train = 0, dev = 0, test = 0;
  bool operator==(const SplitSizes&) const = default;
};

// Bucket sizes for n documents under 70/15/15 (see docs/formats.md).
SplitSizes split_sizes(std::size_t n);
// Seeded uniform assignment of documents to buckets.
Corpus split_corpus(Corpus corpus, std::uint64_t seed);

void save_split(const Corpus& corpus, const std::filesystem::path& path);
void load_split(Corpus& corpus, const std::filesystem::path& path);

// A corpus directory holds transcripts.jsonl and split.json.
void save_corpus_dir(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus_dir(const std::filesystem::path& dir);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // Rebuilds from a full index-ordered token list (tokens[0..1] = PAD, UNK).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int lookup(std::string_view token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  const std::string& token(int index) const { return tokens_.at(index); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }

  int add(const std::string& token);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Built from the Train split only. Index order: descending train frequency,
// ties broken lexicographically.
Vocabulary build_vocab(const Corpus& corpus, int min_freq = 1);

}  // namespace ftmp
