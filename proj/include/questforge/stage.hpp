#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace questforge {

/// The five generation stages, in pipeline order.
enum class StageKind { World, NpcRoster, Player, QuestSet, ExtendedQuest };

inline constexpr std::array<StageKind, 5> kStageOrder = {
    StageKind::World, StageKind::NpcRoster, StageKind::Player,
    StageKind::QuestSet, StageKind::ExtendedQuest};

constexpr int stage_index(StageKind kind) { return static_cast<int>(kind); }

/// Stable lowercase tag used for file names, template directories and fixture matching.
constexpr std::string_view stage_tag(StageKind kind) {
  switch (kind) {
    case StageKind::World: return "world";
    case StageKind::NpcRoster: return "npcs";
    case StageKind::Player: return "player";
    case StageKind::QuestSet: return "quests";
    case StageKind::ExtendedQuest: return "extended";
  }
  return "unknown";
}

constexpr std::string_view stage_name(StageKind kind) {
  switch (kind) {
    case StageKind::World: return "World";
    case StageKind::NpcRoster: return "NpcRoster";
    case StageKind::Player: return "Player";
    case StageKind::QuestSet: return "QuestSet";
    case StageKind::ExtendedQuest: return "ExtendedQuest";
  }
  return "Unknown";
}

/// Accepts either the tag ("npcs") or the enum name ("NpcRoster").
inline std::optional<StageKind> parse_stage(std::string_view text) {
  for (StageKind kind : kStageOrder) {
    if (text == stage_tag(kind) || text == stage_name(kind)) return kind;
  }
  return std::nullopt;
}

/// Stages whose failure halts a run. QuestSet is included: the extended stage has no input without it.
constexpr bool is_halting_stage(StageKind kind) { return kind != StageKind::ExtendedQuest; }

}  // namespace questforge
