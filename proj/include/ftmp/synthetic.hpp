// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ftmp/corpus.hpp"

namespace ftmp {

using TransitionMatrix = Eigen::Matrix<double, kNumTalkMoves, kNumTalkMoves, Eigen::RowMajor>;

// Markov-policy corpus generator settings. Row i of `transitions` is the
// distribution of the next talk move given current move i.
struct SyntheticConfig {
  int num_transcripts = 40;
  int mean_length = 50;
  TransitionMatrix transitions = TransitionMatrix::Constant(1.0 / kNumTalkMoves);
  // Probability that an utterance ends with the cue token of the NEXT move.
  double lexical_cue_strength = 0.0;
  std::uint64_t seed = 0;
};

void validate(const SyntheticConfig& cfg);

SyntheticConfig load_synthetic_config(const std::filesystem::path& path);
void save_synthetic_config(const SyntheticConfig& cfg, const std::filesystem::path& path);
std::string synthetic_config_to_json(const SyntheticConfig& cfg);
SyntheticConfig synthetic_config_from_json(const std::string& text);

// Samples transcripts from the chain; each transcript opens with None.
// Speakers alternate teacher/student by move (Wait = student), consecutive
// Waits keep the same student. Splits 70/15/15 with the same seed when
// there are at least 3 transcripts. Deterministic given the config.
Corpus generate_synthetic(const SyntheticConfig& cfg);

// The token that signals "the next move is m".
std::string cue_token(TalkMove m);
// Template sentences used for utterances of move m (slots unexpanded).
const std::vector<std::string>& templates_for(TalkMove m);
// Every template with its slots expanded to each filler, for lexicon tests.
std::vector<std::string> template_lexicon();

// None -> PressForAccuracy -> Wait -> Revoicing -> KeepingEveryoneTogether ->
// GettingStudentsToRelate -> Restating -> PressForReasoning -> None.
TransitionMatrix cycle_transitions();
TransitionMatrix uniform_transitions();

}  // namespace ftmp
