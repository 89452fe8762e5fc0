#!/usr/bin/env python3
"""Regenerates include/questforge/default_templates.hpp from templates/."""
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
STAGES = ["world", "npcs", "player", "quests", "extended"]

lines = [
    "// Generated by tools/embed_templates.py from templates/. Do not edit.",
    "#pragma once",
    "",
    "#include <string_view>",
    "",
    "#include \"questforge/stage.hpp\"",
    "",
    "namespace questforge::prompts::defaults {",
    "",
    "struct TemplateText {",
    "  std::string_view system;",
    "  std::string_view user;",
    "};",
    "",
]
for stage in STAGES:
    for part in ("system", "user"):
        text = (ROOT / "templates" / stage / f"{part}.txt").read_text(encoding="utf-8")
        assert ")qf\"" not in text
        lines.append(f"inline constexpr std::string_view k_{stage}_{part} = R\"qf({text})qf\";")
    lines.append("")
lines += [
    "constexpr TemplateText for_stage(StageKind kind) {",
    "  switch (kind) {",
    "    case StageKind::World: return {k_world_system, k_world_user};",
    "    case StageKind::NpcRoster: return {k_npcs_system, k_npcs_user};",
    "    case StageKind::Player: return {k_player_system, k_player_user};",
    "    case StageKind::QuestSet: return {k_quests_system, k_quests_user};",
    "    case StageKind::ExtendedQuest: return {k_extended_system, k_extended_user};",
    "  }",
    "  return {};",
    "}",
    "",
    "}  // namespace questforge::prompts::defaults",
    "",
]
(ROOT / "include" / "questforge" / "default_templates.hpp").write_text("\n".join(lines), encoding="utf-8")
