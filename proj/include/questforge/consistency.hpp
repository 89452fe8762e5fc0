#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "questforge/graph.hpp"
#include "questforge/run_state.hpp"
#include "questforge/schema.hpp"

namespace questforge::consistency {

using schema::Severity;

/// The closed set of lint codes.
namespace codes {
inline constexpr std::string_view kDanglingNpcRef = "DanglingNpcRef";
inline constexpr std::string_view kDanglingQuestRef = "DanglingQuestRef";
inline constexpr std::string_view kQuestCycle = "QuestCycle";
inline constexpr std::string_view kUnknownFaction = "UnknownFaction";
inline constexpr std::string_view kUnknownSpeaker = "UnknownSpeaker";
inline constexpr std::string_view kIdMismatch = "IdMismatch";
inline constexpr std::string_view kUnknownRelationLabel = "UnknownRelationLabel";
inline constexpr std::string_view kCountMismatch = "CountMismatch";
}  // namespace codes

inline constexpr std::string_view kAllCodes[] = {
    codes::kDanglingNpcRef, codes::kDanglingQuestRef, codes::kQuestCycle,         codes::kUnknownFaction,
    codes::kUnknownSpeaker, codes::kIdMismatch,       codes::kUnknownRelationLabel, codes::kCountMismatch};

inline std::string trim(std::string_view s) {
  auto begin = s.begin();
  auto end = s.end();
  while (begin != end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end != begin && std::isspace(static_cast<unsigned char>(*(end - 1)))) --end;
  return std::string(begin, end);
}

// ---------------------------------------------------------------------------
// Relation graph

struct RelationGraph {
  struct Node {
    std::string name;
    bool is_player = false;
    /// Referenced by a relation but not present in the roster.
    bool phantom = false;
  };
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::string relation_type;
  };

  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::size_t phantom_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.phantom; }));
  }
  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == name) return i;
    }
    return std::nullopt;
  }
};

/// One edge per relation entry and per player relationship. Targets that are
/// not roster members become phantom nodes.
inline RelationGraph build_relation_graph(const schema::NpcRoster& npcs,
                                          const schema::PlayerDocument* player = nullptr) {
  RelationGraph g;
  std::map<std::string, std::size_t> by_name;
  for (const auto& npc : npcs) {
    if (by_name.emplace(npc.name, g.nodes.size()).second) g.nodes.push_back({npc.name, false, false});
  }
  std::optional<std::size_t> player_node;
  if (player) {
    player_node = g.nodes.size();
    g.nodes.push_back({player->name, true, false});
  }
  auto resolve = [&](const std::string& name) {
    if (auto it = by_name.find(name); it != by_name.end()) return it->second;
    if (player_node && g.nodes[*player_node].name == name) return *player_node;
    const auto idx = g.nodes.size();
    g.nodes.push_back({name, false, true});
    by_name.emplace(name, idx);
    return idx;
  };
  for (const auto& npc : npcs) {
    const auto from = by_name.at(npc.name);
    for (const auto& rel : npc.relations) g.edges.push_back({from, resolve(rel.npc_name), rel.relation_type});
  }
  if (player) {
    for (const auto& [target, label] : player->relationships) g.edges.push_back({*player_node, resolve(target), label});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Quest DAG

struct QuestDag {
  struct DanglingLink {
    std::string from;
    std::string target;
    std::string artifact;
    std::string path;
  };

  std::vector<std::string> nodes;
  /// successors[i] are indices into `nodes`, without duplicates.
  std::vector<std::vector<std::size_t>> successors;
  std::vector<DanglingLink> dangling;
  /// Each entry lists the ids of one strongly connected component with a cycle.
  std::vector<std::vector<std::string>> cycles;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& s : successors) n += s.size();
    return n;
  }
  bool acyclic() const { return cycles.empty(); }
  bool has_edge(std::string_view from, std::string_view to) const {
    const auto f = std::find(nodes.begin(), nodes.end(), from);
    const auto t = std::find(nodes.begin(), nodes.end(), to);
    if (f == nodes.end() || t == nodes.end()) return false;
    const auto& succ = successors[static_cast<std::size_t>(f - nodes.begin())];
    return std::find(succ.begin(), succ.end(), static_cast<std::size_t>(t - nodes.begin())) != succ.end();
  }
};

namespace detail {

inline void add_links(QuestDag& dag, const std::map<std::string, std::size_t>& index, const schema::QuestDocument& q,
                      std::size_t from, const std::string& artifact, const std::string& path_prefix) {
  if (!q.connections) return;
  for (std::size_t i = 0; i < q.connections->next.size(); ++i) {
    const auto& target = q.connections->next[i];
    const auto path = path_prefix + "connections.next[" + std::to_string(i) + "]";
    auto it = index.find(target);
    if (it == index.end()) {
      dag.dangling.push_back({q.id, target, artifact, path});
      continue;
    }
    auto& succ = dag.successors[from];
    if (std::find(succ.begin(), succ.end(), it->second) == succ.end()) succ.push_back(it->second);
  }
}

inline void find_cycles(QuestDag& dag) {
  dag.cycles.clear();
  for (const auto& component : graph::cyclic_components(dag.successors)) {
    std::vector<std::string> ids;
    for (auto v : component) ids.push_back(dag.nodes[v]);
    dag.cycles.push_back(std::move(ids));
  }
}

}  // namespace detail

/// Nodes are campaign quest ids; edges follow `connections.next`. When
/// `extended` is given its connections are added too (keyed by source id).
/// Cycles are reported in the result, never thrown.
inline QuestDag build_quest_dag(const schema::QuestSet& quests,
                                const std::map<std::string, schema::QuestDocument>* extended = nullptr) {
  QuestDag dag;
  std::map<std::string, std::size_t> index;
  for (const auto& q : quests) {
    if (index.emplace(q.id, dag.nodes.size()).second) dag.nodes.push_back(q.id);
  }
  dag.successors.resize(dag.nodes.size());
  for (std::size_t i = 0; i < quests.size(); ++i) {
    detail::add_links(dag, index, quests[i], index.at(quests[i].id), "quests", "[" + std::to_string(i) + "].");
  }
  if (extended) {
    for (const auto& [source_id, doc] : *extended) {
      auto it = index.find(source_id);
      if (it == index.end()) continue;
      detail::add_links(dag, index, doc, it->second, "extended/" + source_id, "");
    }
  }
  detail::find_cycles(dag);
  return dag;
}

// ---------------------------------------------------------------------------
// Lint

struct LintFinding {
  Severity severity = Severity::Error;
  std::string code;
  std::string artifact;  // "world", "npcs", "player", "quests", "extended/<id>"
  std::string path;
  std::string message;

  bool operator==(const LintFinding&) const = default;
};

inline void to_json(nlohmann::json& j, const LintFinding& f) {
  j = nlohmann::json{{"severity", schema::severity_name(f.severity)},
                     {"code", f.code},
                     {"artifact", f.artifact},
                     {"path", f.path},
                     {"message", f.message}};
}

struct LintOptions {
  std::optional<std::size_t> expected_npcs;
  std::optional<std::size_t> expected_quests;
};

inline std::size_t count_severity(const std::vector<LintFinding>& findings, Severity s) {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [s](const LintFinding& f) { return f.severity == s; }));
}

namespace detail {

inline int artifact_rank(std::string_view artifact) {
  if (artifact == "world") return 0;
  if (artifact == "npcs") return 1;
  if (artifact == "player") return 2;
  if (artifact == "quests") return 3;
  return 4;
}

class Linter {
 public:
  void add(Severity s, std::string_view code, std::string artifact, std::string path, std::string message) {
    findings_.push_back({s, std::string(code), std::move(artifact), std::move(path), std::move(message)});
  }

  std::vector<LintFinding> finish() && {
    std::sort(findings_.begin(), findings_.end(), [](const LintFinding& a, const LintFinding& b) {
      return std::forward_as_tuple(artifact_rank(a.artifact), a.artifact, a.path, a.code, a.message) <
             std::forward_as_tuple(artifact_rank(b.artifact), b.artifact, b.path, b.code, b.message);
    });
    return std::move(findings_);
  }

 private:
  std::vector<LintFinding> findings_;
};

inline void check_label(Linter& lint, const std::string& label, const std::string& artifact, const std::string& path) {
  if (!schema::known_relation_labels().count(label)) {
    lint.add(Severity::Info, codes::kUnknownRelationLabel, artifact, path,
             "relation label '" + label + "' is outside the known set");
  }
}

/// "A and B", "A, B" -> {"A", "B"}. A joint owner is written as a list in prose.
inline std::vector<std::string> split_owners(std::string_view text) {
  std::vector<std::string> out;
  std::string rest(text);
  for (auto& sep : {std::string(" and "), std::string(",")}) {
    std::size_t p;
    while ((p = rest.find(sep)) != std::string::npos) rest.replace(p, sep.size(), ";");
  }
  std::size_t start = 0;
  while (start <= rest.size()) {
    auto end = rest.find(';', start);
    if (end == std::string::npos) end = rest.size();
    auto part = trim(std::string_view(rest).substr(start, end - start));
    if (!part.empty()) out.push_back(std::move(part));
    start = end + 1;
  }
  return out;
}

}  // namespace detail

/// Cross-artifact reference checks over a run. Pure; findings are sorted by
/// (artifact, path).
inline std::vector<LintFinding> lint_run(const RunState& state, const LintOptions& options = {}) {
  if (!state.world) throw std::invalid_argument("lint needs at least a world artifact");
  detail::Linter lint;
  const auto& world = *state.world;

  std::set<std::string> factions;
  for (const auto& f : world.politics) factions.insert(trim(f.name));
  for (std::size_t i = 0; i < world.surroundings.size(); ++i) {
    const auto& rf = world.surroundings[i].related_factions;
    for (std::size_t j = 0; j < rf.size(); ++j) {
      if (!factions.count(trim(rf[j]))) {
        lint.add(Severity::Warning, codes::kUnknownFaction, "world",
                 "surroundings[" + std::to_string(i) + "].related_factions[" + std::to_string(j) + "]",
                 "'" + rf[j] + "' is not a faction in politics");
      }
    }
  }
  for (std::size_t i = 0; i < world.buildings.size(); ++i) {
    const auto& controlled_by = world.buildings[i].controlled_by;
    if (factions.count(trim(controlled_by))) continue;
    for (const auto& owner : detail::split_owners(controlled_by)) {
      if (!factions.count(owner)) {
        lint.add(Severity::Warning, codes::kUnknownFaction, "world",
                 "buildings[" + std::to_string(i) + "].controlled_by", "'" + owner + "' is not a faction in politics");
      }
    }
  }

  std::set<std::string> npc_names;
  if (state.npcs) {
    for (const auto& n : *state.npcs) npc_names.insert(trim(n.name));
    for (std::size_t i = 0; i < state.npcs->size(); ++i) {
      const auto& rels = (*state.npcs)[i].relations;
      for (std::size_t j = 0; j < rels.size(); ++j) {
        const auto path = "[" + std::to_string(i) + "].relations[" + std::to_string(j) + "]";
        if (!npc_names.count(trim(rels[j].npc_name))) {
          lint.add(Severity::Error, codes::kDanglingNpcRef, "npcs", path + ".npc_name",
                   "'" + rels[j].npc_name + "' is not in the roster");
        }
        detail::check_label(lint, rels[j].relation_type, "npcs", path + ".relation_type");
      }
    }
    if (options.expected_npcs && state.npcs->size() != *options.expected_npcs) {
      lint.add(Severity::Warning, codes::kCountMismatch, "npcs", "",
               "expected " + std::to_string(*options.expected_npcs) + " NPCs, found " +
                   std::to_string(state.npcs->size()));
    }
  }

  std::string player_name;
  if (state.player) {
    player_name = trim(state.player->name);
    for (const auto& [target, label] : state.player->relationships) {
      if (!npc_names.count(trim(target))) {
        lint.add(Severity::Error, codes::kDanglingNpcRef, "player", "relationships." + target,
                 "'" + target + "' is not in the roster");
      }
      detail::check_label(lint, label, "player", "relationships." + target);
    }
  }

  if (state.quests) {
    const auto& quests = *state.quests;
    for (std::size_t i = 0; i < quests.size(); ++i) {
      if (!npc_names.count(trim(quests[i].quest_giver))) {
        lint.add(Severity::Error, codes::kDanglingNpcRef, "quests", "[" + std::to_string(i) + "].quest_giver",
                 "quest giver '" + quests[i].quest_giver + "' is not in the roster");
      }
    }
    if (options.expected_quests && quests.size() != *options.expected_quests) {
      lint.add(Severity::Warning, codes::kCountMismatch, "quests", "",
               "expected " + std::to_string(*options.expected_quests) + " quests, found " +
                   std::to_string(quests.size()));
    }

    for (const auto& [source_id, doc] : state.extended) {
      const auto artifact = "extended/" + source_id;
      if (!state.find_quest(source_id)) {
        lint.add(Severity::Error, codes::kDanglingQuestRef, artifact, "",
                 "expands '" + source_id + "', which is not in the quest set");
      }
      if (doc.id != source_id) {
        lint.add(Severity::Error, codes::kIdMismatch, artifact, "id",
                 "extended id '" + doc.id + "' differs from source '" + source_id + "'");
      }
      if (!npc_names.count(trim(doc.quest_giver))) {
        lint.add(Severity::Error, codes::kDanglingNpcRef, artifact, "quest_giver",
                 "quest giver '" + doc.quest_giver + "' is not in the roster");
      }
      if (doc.dialogue) {
        for (std::size_t t = 0; t < doc.dialogue->size(); ++t) {
          const auto speaker = trim((*doc.dialogue)[t].speaker);
          if (!npc_names.count(speaker) && speaker != player_name) {
            lint.add(Severity::Warning, codes::kUnknownSpeaker, artifact,
                     "dialogue[" + std::to_string(t) + "].speaker",
                     "'" + speaker + "' is neither a roster NPC nor the player");
          }
        }
      }
    }

    const auto dag = build_quest_dag(quests, &state.extended);
    for (const auto& d : dag.dangling) {
      lint.add(Severity::Error, codes::kDanglingQuestRef, d.artifact, d.path,
               "'" + d.from + "' links to unknown quest '" + d.target + "'");
    }
    for (const auto& cycle : dag.cycles) {
      std::string ids;
      for (const auto& id : cycle) ids += (ids.empty() ? "" : ", ") + id;
      lint.add(Severity::Error, codes::kQuestCycle, "quests", "connections", "quests form a cycle: " + ids);
    }
  }
  return std::move(lint).finish();
}

}  // namespace questforge::consistency
