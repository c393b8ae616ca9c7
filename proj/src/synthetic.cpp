// SPDX-License-Identifier: Apache-2.0
#include "ftmp/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ftmp/error.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

namespace {

const std::vector<std::vector<std::string>>& template_pools() {
  static const std::vector<std::vector<std::string>> pools = {
      // None
      {"Good morning everyone.", "Open your notebooks to page {n}.",
       "So we've just seen that {n} slices of toast get done in {n} minutes.",
       "Today we are working with the {shape}.", "Okay, let's get started.",
       "Put your pencils down for a second."},
      // Wait (student speech)
      {"It's the same shape.", "{n} minutes!", "Because you'd have to use the toaster twice.",
       "I think it's a {shape}.", "It had {n} edges.", "I don't know.",
       "Maybe {n}?", "We counted {n} of them."},
      // PressForAccuracy
      {"What is this called?", "What if I had {n} slices of toast?",
       "How many sides does the {shape} have?", "What did you get for number {n}?",
       "What is {n} times {n}?", "Can you tell me the name of this {shape}?"},
      // KeepingEveryoneTogether
      {"Raise your hand if you know the answer.", "Everyone look up here please.",
       "Can someone repeat that for the class?", "Listen to what {name} is saying.",
       "Eyes on me, everybody.", "Turn to your partner and check."},
      // Revoicing
      {"So you're saying the {shape} has {n} sides.", "So it had {n} edges.",
       "You mean the toaster has to run twice.", "So your group found {n} of them.",
       "In other words it's a {shape}.", "So you think the answer is {n}."},
      // GettingStudentsToRelate
      {"Do you agree or disagree with {name}?", "Who else agrees it would be {n}?",
       "Can anyone add on to what {name} said?", "Does anyone have a different idea?",
       "{name}, what do you think about that?", "Who can build on that?"},
      // Restating
      {"{shape}!", "{n}.", "The same shape.", "{n} minutes.", "A {shape}.",
       "{n} edges."},
      // PressForReasoning
      {"Why would it take {n} minutes?", "How did you decide?",
       "Can you explain your thinking?", "Why do you think it's a {shape}?",
       "How do you know that?", "What made you choose {n}?"},
  };
  return pools;
}

const std::vector<std::string> kNumbers = {"2", "3", "4", "5", "6", "7", "8", "10", "12"};
const std::vector<std::string> kShapes = {"hexagon", "triangle", "square", "pentagon", "rectangle"};
const std::vector<std::string> kNames = {"Michael", "Maria", "Jamal", "Aiko", "Sofia"};
const std::vector<std::string> kStudents = {"S1", "S2", "S3", "S4", "S5", "S6"};

template <typename Rng>
std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <typename Rng>
std::string expand(const std::string& tpl, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size();) {
    auto slot = [&](std::string_view name, const std::vector<std::string>& fill) {
      if (tpl.compare(i, name.size(), name) != 0) return false;
      out += fill[pick(rng, fill.size())];
      i += name.size();
      return true;
    };
    if (slot("{n}", kNumbers) || slot("{shape}", kShapes) || slot("{name}", kNames)) continue;
    out.push_back(tpl[i++]);
  }
  return out;
}

// Inverse-CDF draw that never returns a zero-probability entry.
template <typename Rng>
int sample_row(const TransitionMatrix& m, int row, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last_positive = -1;
  for (int j = 0; j < kNumTalkMoves; ++j) {
    double p = m(row, j);
    if (p <= 0.0) continue;
    last_positive = j;
    acc += p;
    if (u < acc) return j;
  }
  return last_positive;
}

}  // namespace

void validate(const SyntheticConfig& cfg) {
  if (cfg.num_transcripts < 1) throw ValidationError("num_transcripts must be >= 1");
  if (cfg.mean_length < 2) throw ValidationError("mean_length must be >= 2");
  if (!(cfg.lexical_cue_strength >= 0.0 && cfg.lexical_cue_strength <= 1.0))
    throw ValidationError("lexical_cue_strength must be in [0, 1]");
  for (int i = 0; i < kNumTalkMoves; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kNumTalkMoves; ++j) {
      double p = cfg.transitions(i, j);
      if (!std::isfinite(p) || p < 0.0)
        throw ValidationError("transition matrix entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") must be a finite nonnegative number");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("transition row " + std::to_string(i) + " sums to " +
                            std::to_string(sum) + ", expected 1");
  }
}

std::string synthetic_config_to_json(const SyntheticConfig& cfg) {
  json rows = json::array();
  for (int i = 0; i < kNumTalkMoves; ++i) {
    json row = json::array();
    for (int j = 0; j < kNumTalkMoves; ++j) row.push_back(cfg.transitions(i, j));
    rows.push_back(row);
  }
  json j = {{"num_transcripts", cfg.num_transcripts},
            {"mean_length", cfg.mean_length},
            {"transition_matrix", rows},
            {"lexical_cue_strength", cfg.lexical_cue_strength},
            {"seed", cfg.seed}};
  return j.dump(2);
}

SyntheticConfig synthetic_config_from_json(const std::string& text) {
  SyntheticConfig cfg;
  try {
    auto j = json::parse(text);
    cfg.num_transcripts = j.value("num_transcripts", cfg.num_transcripts);
    cfg.mean_length = j.value("mean_length", cfg.mean_length);
    cfg.lexical_cue_strength = j.value("lexical_cue_strength", cfg.lexical_cue_strength);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("transition_matrix")) {
      const auto& rows = j.at("transition_matrix");
      if (!rows.is_array() || rows.size() != kNumTalkMoves)
        throw ValidationError("transition_matrix must be 8x8");
      for (int i = 0; i < kNumTalkMoves; ++i) {
        if (!rows[i].is_array() || rows[i].size() != kNumTalkMoves)
          throw ValidationError("transition_matrix must be 8x8");
        for (int k = 0; k < kNumTalkMoves; ++k) cfg.transitions(i, k) = rows[i][k].get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return synthetic_config_from_json(ss.str());
}

void save_synthetic_config(const SyntheticConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << synthetic_config_to_json(cfg) << '\n';
}

std::string cue_token(TalkMove m) {
  std::string name(name_of(m));
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return "cue_" + name;
}

const std::vector<std::string>& templates_for(TalkMove m) { return template_pools()[index_of(m)]; }

std::vector<std::string> template_lexicon() {
  std::vector<std::string> out;
  for (const auto& pool : template_pools()) {
    for (const auto& tpl : pool) {
      // Expand each slot kind with every filler in lockstep; enough to cover the lexicon.
      for (std::size_t k = 0; k < kShapes.size(); ++k) {
        std::string s;
        for (std::size_t i = 0; i < tpl.size();) {
          if (tpl.compare(i, 3, "{n}") == 0) {
            s += kNumbers[k % kNumbers.size()];
            i += 3;
          } else if (tpl.compare(i, 7, "{shape}") == 0) {
            s += kShapes[k];
            i += 7;
          } else if (tpl.compare(i, 6, "{name}") == 0) {
            s += kNames[k % kNames.size()];
            i += 6;
          } else {
            s.push_back(tpl[i++]);
          }
        }
        out.push_back(s);
        if (s == tpl) break;
      }
    }
  }
  return out;
}

TransitionMatrix cycle_transitions() {
  using M = TalkMove;
  const M order[] = {M::None,
                     M::PressForAccuracy,
                     M::Wait,
                     M::Revoicing,
                     M::KeepingEveryoneTogether,
                     M::GettingStudentsToRelate,
                     M::Restating,
                     M::PressForReasoning};
  TransitionMatrix t = TransitionMatrix::Zero();
  for (int k = 0; k < kNumTalkMoves; ++k)
    t(index_of(order[k]), index_of(order[(k + 1) % kNumTalkMoves])) = 1.0;
  return t;
}

TransitionMatrix uniform_transitions() { return TransitionMatrix::Constant(1.0 / kNumTalkMoves); }

Corpus generate_synthetic(const SyntheticConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  const int lo = std::max(2, cfg.mean_length / 2);
  const int hi = std::max(lo, cfg.mean_length + cfg.mean_length / 2);

  Corpus corpus;
  corpus.transcripts.reserve(cfg.num_transcripts);
  for (int t = 0; t < cfg.num_transcripts; ++t) {
    const int length = std::uniform_int_distribution<int>(lo, hi)(rng);
    std::vector<int> moves(length);
    moves[0] = index_of(TalkMove::None);
    for (int i = 1; i < length; ++i) moves[i] = sample_row(cfg.transitions, moves[i - 1], rng);

    char id[32];
    std::snprintf(id, sizeof id, "syn-%04d", t);
    Transcript tr{id, {}};
    std::string student;
    for (int i = 0; i < length; ++i) {
      const auto move = talk_move_from_index(moves[i]);
      Utterance u;
      u.idx = i;
      u.talk_move = move;
      if (move == TalkMove::Wait) {
        u.role = Role::Student;
        if (i == 0 || moves[i - 1] != index_of(TalkMove::Wait))
          student = kStudents[pick(rng, kStudents.size())];
        u.speaker_id = student;
      } else {
        u.role = Role::Teacher;
        u.speaker_id = "T";
      }
      const auto& pool = templates_for(move);
      u.text = expand(pool[pick(rng, pool.size())], rng);
      if (i + 1 < length && cfg.lexical_cue_strength > 0.0 &&
          std::bernoulli_distribution(cfg.lexical_cue_strength)(rng))
        u.text += " " + cue_token(talk_move_from_index(moves[i + 1]));
      tr.utterances.push_back(std::move(u));
    }
    corpus.transcripts.push_back(std::move(tr));
  }
  if (corpus.transcripts.size() >= 3) corpus = split_corpus(std::move(corpus), cfg.seed);
  return corpus;
}

}  // namespace ftmp
