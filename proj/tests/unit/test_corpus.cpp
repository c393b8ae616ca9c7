// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ftmp/corpus.hpp"
#include "ftmp/error.hpp"
#include "ftmp/synthetic.hpp"
#include "ftmp/tokenizer.hpp"
#include "json.hpp"

using namespace ftmp;
namespace fs = std::filesystem;

namespace {

std::string line(const std::string& tid, int idx, const std::string& speaker, const std::string& role,
                 const std::string& text, const std::string& label) {
  return nlohmann::json{{"transcript_id", tid}, {"idx", idx},   {"speaker_id", speaker},
                        {"role", role},         {"text", text}, {"label", label}}
             .dump() +
         "\n";
}

Corpus parse(const std::string& s, bool raw = true) {
  std::istringstream in(s);
  return parse_corpus(in, raw);
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ftmp_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("talk-move indices and names are fixed") {
  const std::vector<std::string> want = {"None",      "Wait",
                                         "PressForAccuracy", "KeepingEveryoneTogether",
                                         "Revoicing", "GettingStudentsToRelate",
                                         "Restating", "PressForReasoning"};
  for (int k = 0; k < kNumTalkMoves; ++k) {
    const auto m = talk_move_from_index(k);
    CHECK(index_of(m) == k);
    CHECK(name_of(m) == want[k]);
    CHECK(parse_talk_move(want[k]) == m);
  }
  CHECK(display_name_of(TalkMove::PressForAccuracy) == "Press for Accuracy");
  CHECK_FALSE(parse_talk_move("Marking").has_value());
  CHECK_THROWS(talk_move_from_index(8));
  CHECK(kPadMove == 8);
}

TEST_CASE("tokenizer matches the reference golden file") {
  std::ifstream in(std::string(FTMP_TEST_DATA) + "/tokenizer_golden.jsonl");
  REQUIRE(in);
  std::string l;
  int n = 0;
  while (std::getline(in, l)) {
    const auto j = nlohmann::json::parse(l);
    const auto text = j["text"].get<std::string>();
    CAPTURE(text);
    CHECK(tokenize(text) == j["tokens"].get<std::vector<std::string>>());
    ++n;
  }
  CHECK(n >= 40);
}

TEST_CASE("tokenizer basics") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   ").empty());
  CHECK(tokenize("Raise your hand!") == std::vector<std::string>{"Raise", "your", "hand", "!"});
  CHECK(tokenize("don't") == std::vector<std::string>{"do", "n't"});
}

TEST_CASE("tokenizer is idempotent on the template lexicon") {
  const auto lexicon = template_lexicon();
  REQUIRE(!lexicon.empty());
  for (const auto& s : lexicon) {
    const auto once = tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    CAPTURE(s);
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("raw labels are merged") {
  const auto c = parse(line("a", 0, "T", "teacher", "hi", "Marking") + line("a", 1, "S1", "student", "yo", "Context"));
  REQUIRE(c.transcripts.size() == 1);
  CHECK(c.transcripts[0].utterances[0].talk_move == TalkMove::Restating);
  CHECK(c.transcripts[0].utterances[1].talk_move == TalkMove::Wait);
  CHECK_THROWS_AS(parse(line("a", 0, "T", "teacher", "hi", "Marking"), false), ValidationError);
}

TEST_CASE("ingestion errors") {
  CHECK(error_of([] { parse(""); }) == "no transcripts");
  const auto bad_json = error_of([] { parse(line("a", 0, "T", "teacher", "x", "None") + "{oops\n"); });
  CHECK(bad_json.rfind("line 2:", 0) == 0);
  CHECK_THROWS_AS(parse(line("a", 0, "T", "teacher", "x", "None") + "{oops\n"), ParseError);
  const auto unknown = error_of([] { parse(line("a", 0, "T", "teacher", "x", "Praise")); });
  CHECK(unknown.find("Praise") != std::string::npos);
  CHECK_THROWS_AS(parse(line("a", 0, "S", "student", "x", "Revoicing")), ValidationError);
  CHECK_THROWS_AS(parse(line("a", 0, "T", "teacher", "x", "Wait")), ValidationError);
  CHECK_THROWS_AS(parse(line("a", 1, "T", "teacher", "x", "None") + line("a", 1, "T", "teacher", "y", "None")),
                  ValidationError);
  CHECK_THROWS_AS(parse("{\"transcript_id\": \"a\", \"idx\": 0}\n"), ParseError);
}

TEST_CASE("corpus round-trips through JSONL") {
  SyntheticConfig cfg;
  cfg.num_transcripts = 6;
  cfg.mean_length = 10;
  cfg.lexical_cue_strength = 0.5;
  cfg.seed = 3;
  const auto c = generate_synthetic(cfg);
  std::stringstream ss;
  write_corpus(ss, c);
  auto back = parse_corpus(ss, false);
  back.split = c.split;
  CHECK(back == c);

  const auto dir = temp_dir("corpus_dir");
  save_corpus_dir(c, dir);
  CHECK(load_corpus_dir(dir) == c);
}

TEST_CASE("split sizes") {
  CHECK(split_sizes(216) == SplitSizes{152, 32, 32});
  CHECK(split_sizes(10) == SplitSizes{7, 2, 1});
  CHECK(split_sizes(3) == SplitSizes{1, 1, 1});
  for (std::size_t n = 3; n <= 500; ++n) {
    const auto s = split_sizes(n);
    CAPTURE(n);
    CHECK(s.train + s.dev + s.test == n);
    CHECK(s.dev >= 1);
    CHECK(s.test >= 1);
    // Each bucket within one document of its rounded target.
    const double targets[3] = {0.70 * n, 0.15 * n, 0.15 * n};
    const std::size_t got[3] = {s.train, s.dev, s.test};
    for (int b = 0; b < 3; ++b) CHECK(std::abs(static_cast<double>(got[b]) - std::round(targets[b])) <= 1.0);
  }
}

TEST_CASE("splitting is seeded and covers every document once") {
  SyntheticConfig cfg;
  cfg.num_transcripts = 30;
  cfg.mean_length = 4;
  auto c = generate_synthetic(cfg);
  const auto a = split_corpus(c, 5), b = split_corpus(c, 5), d = split_corpus(c, 6);
  CHECK(a.split == b.split);
  CHECK(a.split != d.split);
  CHECK(a.split.size() == 30);
  CHECK(a.in(Bucket::Train).size() == 21);
  CHECK_NOTHROW(validate(a));
  Corpus tiny;
  tiny.transcripts = {c.transcripts[0], c.transcripts[1]};
  CHECK_THROWS_AS(split_corpus(tiny, 1), ValidationError);
}

TEST_CASE("vocabulary comes from the training split only") {
  Corpus c = parse(line("tr", 0, "T", "teacher", "a a a b", "None") + line("dv", 0, "T", "teacher", "zeta a", "None") +
                   line("te", 0, "T", "teacher", "omega", "None"));
  c.split = {{"tr", Bucket::Train}, {"dv", Bucket::Dev}, {"te", Bucket::Test}};
  const auto v1 = build_vocab(c, 1);
  CHECK(v1.size() == 4);
  CHECK(v1.token(0) == "<pad>");
  CHECK(v1.token(1) == "<unk>");
  CHECK(v1.token(2) == "a");
  CHECK(v1.token(3) == "b");
  CHECK(v1.lookup("zeta") == Vocabulary::kUnk);
  const auto v2 = build_vocab(c, 2);
  CHECK(v2.lookup("a") == 2);
  CHECK(v2.lookup("b") == Vocabulary::kUnk);
  CHECK(build_vocab(c, 1) == v1);
  CHECK_THROWS_AS(build_vocab(c, 0), ValidationError);

  Corpus no_train = c;
  no_train.split["tr"] = Bucket::Dev;
  CHECK_THROWS_AS(build_vocab(no_train, 1), ValidationError);
}

TEST_CASE("vocabulary rebuilds from its token list") {
  Vocabulary v;
  v.add("x");
  v.add("y");
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"x", "<unk>"}), ValidationError);
}

TEST_CASE("synthetic corpora") {
  SyntheticConfig cfg;
  cfg.num_transcripts = 8;
  cfg.mean_length = 20;
  cfg.seed = 11;

  SUBCASE("deterministic cycle") {
    cfg.transitions = cycle_transitions();
    const auto c = generate_synthetic(cfg);
    for (const auto& t : c.transcripts) {
      CHECK(t.utterances[0].talk_move == TalkMove::None);
      for (std::size_t i = 1; i < t.utterances.size(); ++i) {
        const int prev = index_of(t.utterances[i - 1].talk_move);
        CHECK(cfg.transitions(prev, index_of(t.utterances[i].talk_move)) == 1.0);
      }
    }
  }
  SUBCASE("seeded and byte-identical") {
    std::stringstream a, b;
    write_corpus(a, generate_synthetic(cfg));
    write_corpus(b, generate_synthetic(cfg));
    CHECK(a.str() == b.str());
    cfg.seed = 12;
    std::stringstream d;
    write_corpus(d, generate_synthetic(cfg));
    CHECK(a.str() != d.str());
  }
  SUBCASE("no cue tokens at strength 0, always at strength 1") {
    for (double strength : {0.0, 1.0}) {
      cfg.lexical_cue_strength = strength;
      const auto c = generate_synthetic(cfg);
      for (const auto& t : c.transcripts)
        for (std::size_t i = 0; i < t.utterances.size(); ++i) {
          const auto toks = tokenize(t.utterances[i].text);
          const bool has_cue = std::any_of(toks.begin(), toks.end(), [](const std::string& s) { return s.rfind("cue_", 0) == 0; });
          if (strength == 0.0) {
            CHECK_FALSE(has_cue);
          } else if (i + 1 < t.utterances.size()) {
            CHECK(toks.back() == cue_token(t.utterances[i + 1].talk_move));
          }
        }
    }
  }
  SUBCASE("speakers follow roles") {
    const auto c = generate_synthetic(cfg);
    CHECK_NOTHROW(validate(c));
    for (const auto& t : c.transcripts)
      for (std::size_t i = 1; i < t.utterances.size(); ++i) {
        const auto& u = t.utterances[i];
        const auto& p = t.utterances[i - 1];
        CHECK((u.role == Role::Student) == (u.talk_move == TalkMove::Wait));
        if (u.role == Role::Student && p.role == Role::Student) CHECK(u.speaker_id == p.speaker_id);
      }
  }
  SUBCASE("config validation and JSON round-trip") {
    cfg.transitions(2, 2) += 0.5;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
    cfg.transitions = cycle_transitions();
    cfg.lexical_cue_strength = 0.25;
    const auto back = synthetic_config_from_json(synthetic_config_to_json(cfg));
    CHECK(back.transitions == cfg.transitions);
    CHECK(back.lexical_cue_strength == cfg.lexical_cue_strength);
    CHECK(back.seed == cfg.seed);
    cfg.lexical_cue_strength = 1.5;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
  }
}

}
