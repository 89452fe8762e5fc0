#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "questforge/schema.hpp"
#include "questforge/stage.hpp"

namespace questforge {

/// All validated artifacts of one run. This is the only thing carried from one
/// stage to the next.
struct RunState {
  std::optional<schema::WorldDocument> world;
  std::optional<schema::NpcRoster> npcs;
  std::optional<schema::PlayerDocument> player;
  std::optional<schema::QuestSet> quests;
  /// Accepted extended quests keyed by the id of the campaign quest they expand.
  std::map<std::string, schema::QuestDocument> extended;

  bool has(StageKind kind) const {
    switch (kind) {
      case StageKind::World: return world.has_value();
      case StageKind::NpcRoster: return npcs.has_value();
      case StageKind::Player: return player.has_value();
      case StageKind::QuestSet: return quests.has_value();
      case StageKind::ExtendedQuest: return !extended.empty();
    }
    return false;
  }

  /// Population order: a later artifact never exists without every earlier one.
  bool ordered() const {
    bool gap = false;
    for (StageKind kind : kStageOrder) {
      if (kind == StageKind::ExtendedQuest) break;
      if (!has(kind)) {
        gap = true;
      } else if (gap) {
        return false;
      }
    }
    return extended.empty() || quests.has_value();
  }

  const schema::QuestDocument* find_quest(const std::string& id) const {
    if (!quests) return nullptr;
    for (const auto& q : *quests) {
      if (q.id == id) return &q;
    }
    return nullptr;
  }

  bool operator==(const RunState&) const = default;
};

}  // namespace questforge
