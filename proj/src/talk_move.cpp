// SPDX-License-Identifier: Apache-2.0
#include "ftmp/talk_move.hpp"

#include "ftmp/error.hpp"

namespace ftmp {

namespace {

constexpr std::array<std::string_view, kNumTalkMoves> kWireNames = {
    "None",      "Wait",
    "PressForAccuracy", "KeepingEveryoneTogether",
    "Revoicing", "GettingStudentsToRelate",
    "Restating", "PressForReasoning"};

constexpr std::array<std::string_view, kNumTalkMoves> kDisplayNames = {
    "None",      "Wait",
    "Press for Accuracy", "Keeping Everyone Together",
    "Revoicing", "Getting Students to Relate",
    "Restating", "Press for Reasoning"};

}  // namespace

TalkMove talk_move_from_index(int index) {
  if (index < 0 || index >= kNumTalkMoves)
    throw ValidationError("talk move index out of range: " + std::to_string(index));
  return static_cast<TalkMove>(index);
}

std::string_view name_of(TalkMove m) { return kWireNames[index_of(m)]; }

std::string_view display_name_of(TalkMove m) { return kDisplayNames[index_of(m)]; }

std::optional<TalkMove> parse_talk_move(std::string_view name) {
  for (int i = 0; i < kNumTalkMoves; ++i)
    if (kWireNames[i] == name) return static_cast<TalkMove>(i);
  return std::nullopt;
}

std::string_view name_of(Facet f) {
  switch (f) {
    case Facet::NoneBin: return "None";
    case Facet::WaitBin: return "Wait";
    case Facet::LearningCommunity: return "LearningCommunity";
    case Facet::ContentKnowledge: return "ContentKnowledge";
    case Facet::RigorousThinking: return "RigorousThinking";
  }
  return "?";
}

std::string_view name_of(Role r) { return r == Role::Teacher ? "teacher" : "student"; }

std::optional<Role> parse_role(std::string_view name) {
  if (name == "teacher") return Role::Teacher;
  if (name == "student") return Role::Student;
  return std::nullopt;
}

}  // namespace ftmp
