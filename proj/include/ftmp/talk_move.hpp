// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ftmp {

// Canonical teacher talk moves. The index order is part of every matrix,
// report and wire format and must never change.
enum class TalkMove : std::uint8_t {
  None = 0,
  Wait = 1,
  PressForAccuracy = 2,
  KeepingEveryoneTogether = 3,
  Revoicing = 4,
  GettingStudentsToRelate = 5,
  Restating = 6,
  PressForReasoning = 7,
};

inline constexpr int kNumTalkMoves = 8;
// Index of the left-padding sentinel in talk-move embedding tables.
inline constexpr int kPadMove = 8;

inline constexpr std::array<TalkMove, kNumTalkMoves> kAllTalkMoves = {
    TalkMove::None,      TalkMove::Wait,
    TalkMove::PressForAccuracy, TalkMove::KeepingEveryoneTogether,
    TalkMove::Revoicing, TalkMove::GettingStudentsToRelate,
    TalkMove::Restating, TalkMove::PressForReasoning};

constexpr int index_of(TalkMove m) { return static_cast<int>(m); }
TalkMove talk_move_from_index(int index);

// Canonical wire name, e.g. "PressForAccuracy".
std::string_view name_of(TalkMove m);
// Human-readable name, e.g. "Press for Accuracy".
std::string_view display_name_of(TalkMove m);
std::optional<TalkMove> parse_talk_move(std::string_view name);

// Accountability facets plus the two non-APT bins.
enum class Facet : std::uint8_t {
  NoneBin = 0,
  WaitBin = 1,
  LearningCommunity = 2,
  ContentKnowledge = 3,
  RigorousThinking = 4,
};

inline constexpr int kNumFacets = 5;

std::string_view name_of(Facet f);

enum class Role : std::uint8_t { Teacher, Student };

std::string_view name_of(Role r);
std::optional<Role> parse_role(std::string_view name);

}  // namespace ftmp
