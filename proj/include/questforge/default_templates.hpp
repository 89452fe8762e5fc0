// Generated by tools/embed_templates.py from templates/. Do not edit.
#pragma once

#include <string_view>

#include "questforge/stage.hpp"

namespace questforge::prompts::defaults {

struct TemplateText {
  std::string_view system;
  std::string_view user;
};

inline constexpr std::string_view k_world_system = R"qf(You are a fantasy worldbuilder designing the setting of a role-playing game. You produce structured game data, not prose.
Return only valid JSON that follows standard parsing rules. Do not add markdown, comments, or any explanatory text before or after the JSON.
)qf";
inline constexpr std::string_view k_world_user = R"qf(Design the game world for a new role-playing campaign.

Design intent from the user (may be empty): {{user_intent}}

Return a single JSON object with exactly these top-level fields:
- "city": a description of the main city (string)
- "surroundings": array of surrounding locations, each an object {"name", "type", "resources", "dependencies", "related_factions"} where "related_factions" is an array of faction names
- "buildings": array of key buildings, each an object {"name", "type", "district", "controlled_by"}
- "politics": array of factions, each an object {"name", "type", "goals", "rivals"}

Names must be unique within each array. Every faction named in "related_factions" or "controlled_by" must also appear in "politics". Use strings for every text field.
)qf";

inline constexpr std::string_view k_npcs_system = R"qf(You are a narrative designer who populates an established role-playing game world with non-player characters. You produce structured game data, not prose.
Return only valid JSON that follows standard parsing rules. Do not add markdown, comments, or any explanatory text before or after the JSON.
)qf";
inline constexpr std::string_view k_npcs_user = R"qf(The game world, as structured JSON:
{{world}}

Create exactly {{npc_count}} non-player characters who live in this world. Ground their roles, skills and secrets in the world's locations and factions.

Return a JSON array. Each element is an object:
{"name": string, "role": string, "traits": [string], "skills": [string], "flaws": [string], "secrets": [string], "relations": [{"npc_name": string, "relation_type": string}]}

Names must be unique. Every "npc_name" in "relations" must be another character from the same array, never the character itself. Use short relation labels such as "Conflict", "Rivalry", "Cooperation" or "Mentor".
)qf";

inline constexpr std::string_view k_player_system = R"qf(You are a narrative designer creating the player character of a role-playing game inside an established world and social network. You produce structured game data, not prose.
Return only valid JSON that follows standard parsing rules. Do not add markdown, comments, or any explanatory text before or after the JSON.
)qf";
inline constexpr std::string_view k_player_user = R"qf(The game world, as structured JSON:
{{world}}

Non-player characters the hero already knows, as structured JSON:
{{npcs}}

Create the player character: a protagonist whose history, motivations and affiliations fit this world and these characters.

Return a single JSON object:
{"name": string, "class": uppercase class label such as "WARRIOR", "background": string, "main_attributes": {attribute name: integer >= 1}, "relationships": {NPC name: relation label}}

Every key in "relationships" must be the exact name of a character listed above.
)qf";

inline constexpr std::string_view k_quests_system = R"qf(You are a campaign designer planning the main storyline of a role-playing game. You produce structured game data, not prose.
Return only valid JSON that follows standard parsing rules. Do not add markdown, comments, or any explanatory text before or after the JSON.
)qf";
inline constexpr std::string_view k_quests_user = R"qf(The game world, as structured JSON:
{{world}}

The non-player characters, as structured JSON:
{{npcs}}

The player character, as structured JSON:
{{player}}

Plan exactly {{quest_count}} campaign-level quests that together form the main storyline. Keep each quest a lightweight planning record; later steps add narrative detail.

Return a JSON array. Each element is an object:
{"id": string such as "M1", "title": string, "quest_giver": NPC name, "objectives": [string], "connections": {"next": [quest id]}, "rewards": [string]}

Ids must be unique. Every "quest_giver" must be the exact name of a listed non-player character. Every id in "connections.next" must be another quest in this array, and following "next" links must never lead back to an earlier quest.
)qf";

inline constexpr std::string_view k_extended_system = R"qf(You are a quest writer elaborating one quest of a planned role-playing campaign into a detailed, playable narrative. You produce structured game data, not prose.
Return only valid JSON that follows standard parsing rules. Do not add markdown, comments, or any explanatory text before or after the JSON.
)qf";
inline constexpr std::string_view k_extended_user = R"qf(The game world, as structured JSON:
{{world}}

The non-player characters, as structured JSON:
{{npcs}}

The player character, as structured JSON:
{{player}}

The full campaign quest set, as structured JSON:
{{quests}}

The quest to expand, as structured JSON:
{{target_quest}}

Expand this quest into a detailed narrative while keeping its "id", "title" and "quest_giver" unchanged and its "connections" consistent with the campaign.

Return a single JSON object:
{"id": string, "title": string, "quest_giver": NPC name, "objectives": [string], "dialogue": [{"speaker": string, "content": string}], "connections": {"next": [quest id]}, "rewards": [string]}

You may add fields such as "description", "decision_points" or "consequences". Every dialogue "speaker" must be a listed non-player character or the player character.
)qf";

constexpr TemplateText for_stage(StageKind kind) {
  switch (kind) {
    case StageKind::World: return {k_world_system, k_world_user};
    case StageKind::NpcRoster: return {k_npcs_system, k_npcs_user};
    case StageKind::Player: return {k_player_system, k_player_user};
    case StageKind::QuestSet: return {k_quests_system, k_quests_user};
    case StageKind::ExtendedQuest: return {k_extended_system, k_extended_user};
  }
  return {};
}

}  // namespace questforge::prompts::defaults
