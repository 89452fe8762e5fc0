#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "questforge/questforge.hpp"

namespace qf_test {

namespace fs = std::filesystem;
using nlohmann::json;
using Rng = std::mt19937_64;
using namespace questforge;

inline fs::path fixture_path(const std::string& name) { return fs::path(QF_FIXTURE_DIR) / name; }
inline fs::path template_dir() { return fs::path(QF_TEMPLATE_DIR); }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "qf_test_XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Listing excerpts, completed into minimal valid documents where the excerpt
// elides required entries.

inline json listing_world() {
  return json::parse(R"({
    "city": "Marinth Vell, the Tideglass Metropolis...",
    "surroundings": [{
      "name": "Storm-Kiln Caldera",
      "type": "volcanic caldera and storm-factory",
      "resources": "Storm energy, fulgurites",
      "dependencies": "Storm access required for tideglass production",
      "related_factions": ["Glassworkers' Concord", "Conclave of Prismancers", "House Saltvein"]
    }],
    "buildings": [{
      "name": "Beacon of Myr Sal",
      "type": "living lighthouse",
      "district": "Glassward",
      "controlled_by": "Conclave of Prismancers and Faith of Azerene"
    }],
    "politics": [{
      "name": "Glassworkers' Concord",
      "type": "craft guild",
      "goals": "Maintain control over tideglass craft",
      "rivals": "Conclave of Prismancers"
    }]
  })");
}

inline json listing_npc() {
  return json::parse(R"({
    "name": "Isha Brinehand",
    "role": "Foreman-Keeper of the Dockers' Syndicate",
    "traits": ["charismatic", "protective", "combative"],
    "skills": ["strike organization", "crowd speaking", "contract bargaining"],
    "flaws": ["impulsive", "holds grudges"],
    "secrets": ["Funded lantern blackouts during labor negotiations",
                "Shelters a deserter Warden under a false docker's name"],
    "relations": [
      { "npc_name": "Sorev Katch", "relation_type": "Conflict" },
      { "npc_name": "Sel Var Saltvein", "relation_type": "Rivalry" },
      { "npc_name": "Nerey Alis", "relation_type": "Cooperation" }
    ]
  })");
}

inline json listing_player() {
  return json::parse(R"({
    "name": "Tairn Latch",
    "class": "WARRIOR",
    "background": "Marsh-born chainhouse rigger...",
    "main_attributes": { "strength": 16, "constitution": 15, "dexterity": 14 },
    "relationships": { "Isha Brinehand": "Mentor", "Sel Var Saltvein": "Rival" }
  })");
}

inline json listing_quest() {
  return json::parse(R"({
    "id": "M1",
    "title": "When the Beacon Keens on a Clear Sky",
    "quest_giver": "Isha Brinehand",
    "objectives": ["Stabilize the chainlift at Chainmouth", "Meet Captain-Major Sorev Katch"]
  })");
}

inline json listing_extended() {
  return json::parse(R"({
    "id": "M1",
    "title": "When the Beacon Keens on a Clear Sky",
    "quest_giver": "Isha Brinehand",
    "objectives": ["Stabilize the jammed chainlift at Chainmouth",
                   "Report findings to Captain-Major Sorev Katch"],
    "dialogue": [
      { "speaker": "Isha Brinehand", "content": "The Beacon shouldn't sing when the sky is clean..." },
      { "speaker": "Tairn Latch", "content": "I'll climb and listen if the Conclave will let me." },
      { "speaker": "Sorev Katch", "content": "Bring me something I can act on." }
    ],
    "connections": { "next": ["M2"] },
    "rewards": ["Dockers' Syndicate hazard pay", "River Wardens access pass"]
  })");
}

// ---------------------------------------------------------------------------
// Generators

namespace gen {

inline std::size_t below(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng& rng) { return below(rng, 2) == 0; }

/// Non-blank text drawn from a pool with quotes, escapes, unicode and newlines.
inline std::string text(Rng& rng) {
  static const std::vector<std::string> atoms = {"tide", "glass", "Beacon", "\"quoted\"", "back\\slash", "naïve",
                                                 "潮", "line\nbreak", "tab\tbed", "{brace}", "[bracket]", "```",
                                                 "M1", " ", "Ω", "emoji 🙂", "a,b"};
  std::string s = atoms[below(rng, atoms.size() - 1)];
  const auto extra = below(rng, 4);
  for (std::size_t i = 0; i < extra; ++i) s += atoms[below(rng, atoms.size())];
  if (s.find_first_not_of(" \t\n") == std::string::npos) s += "x";
  return s;
}

inline std::string maybe_empty_text(Rng& rng) { return below(rng, 5) == 0 ? std::string{} : text(rng); }

inline std::vector<std::string> texts(Rng& rng, std::size_t min_len = 0) {
  std::vector<std::string> out(min_len + below(rng, 4));
  for (auto& s : out) s = text(rng);
  return out;
}

/// Distinct non-blank names.
inline std::vector<std::string> names(Rng& rng, std::size_t n) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  while (out.size() < n) {
    auto s = text(rng) + " " + std::to_string(below(rng, 1000));
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

inline json scalar(Rng& rng) {
  switch (below(rng, 5)) {
    case 0: return static_cast<std::int64_t>(below(rng, 2000)) - 1000;
    case 1: return static_cast<double>(below(rng, 64)) / 8.0;
    case 2: return coin(rng);
    case 3: return nullptr;
    default: return text(rng);
  }
}

/// Unknown fields; keys are prefixed so they never shadow a schema field.
inline json extra(Rng& rng) {
  json out = json::object();
  if (below(rng, 3) != 0) return out;
  const auto n = 1 + below(rng, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = "x_" + text(rng);
    switch (below(rng, 3)) {
      case 0: out[key] = scalar(rng); break;
      case 1: out[key] = json::array({scalar(rng), scalar(rng)}); break;
      default: out[key] = json{{"nested", scalar(rng)}};
    }
  }
  return out;
}

inline std::string quest_id(Rng& rng, std::size_t i) {
  static const std::vector<std::string> prefixes = {"M", "Q", "SQ", "Side"};
  return prefixes[below(rng, prefixes.size())] + std::to_string(i + 1);
}

inline schema::WorldDocument world(Rng& rng) {
  schema::WorldDocument w;
  w.city = text(rng);
  const auto factions = names(rng, 1 + below(rng, 3));
  for (const auto& name : names(rng, 1 + below(rng, 3))) {
    schema::Surrounding s{name, maybe_empty_text(rng), maybe_empty_text(rng), maybe_empty_text(rng), {}, extra(rng)};
    for (std::size_t i = 0, n = below(rng, 3); i < n; ++i) s.related_factions.push_back(factions[below(rng, factions.size())]);
    w.surroundings.push_back(std::move(s));
  }
  for (const auto& name : names(rng, 1 + below(rng, 3))) {
    w.buildings.push_back({name, maybe_empty_text(rng), maybe_empty_text(rng),
                           coin(rng) ? factions[below(rng, factions.size())] : text(rng), extra(rng)});
  }
  for (const auto& name : factions) {
    w.politics.push_back({name, maybe_empty_text(rng), maybe_empty_text(rng), maybe_empty_text(rng), extra(rng)});
  }
  w.extra = extra(rng);
  return w;
}

inline std::string relation_label(Rng& rng) {
  static const std::vector<std::string> labels = {"Conflict", "Rivalry", "Cooperation", "Mentor", "Rival", "Debt"};
  return labels[below(rng, labels.size())];
}

inline schema::NpcRoster roster(Rng& rng, std::size_t n, const std::vector<std::string>& extra_targets = {}) {
  const auto ns = names(rng, n);
  schema::NpcRoster out;
  for (std::size_t i = 0; i < n; ++i) {
    schema::NpcDocument d;
    d.name = ns[i];
    d.role = maybe_empty_text(rng);
    d.traits = texts(rng);
    d.skills = texts(rng);
    d.flaws = texts(rng);
    d.secrets = texts(rng);
    for (std::size_t k = 0, m = below(rng, 4); k < m; ++k) {
      std::string target;
      if (!extra_targets.empty() && below(rng, 4) == 0) {
        target = extra_targets[below(rng, extra_targets.size())];
      } else if (n > 1) {
        do target = ns[below(rng, n)]; while (target == d.name);
      } else {
        continue;
      }
      d.relations.push_back({target, relation_label(rng), extra(rng)});
    }
    d.extra = extra(rng);
    out.push_back(std::move(d));
  }
  return out;
}

inline schema::PlayerDocument player(Rng& rng, const schema::NpcRoster& npcs) {
  schema::PlayerDocument p;
  p.name = "Player " + text(rng);
  p.player_class = coin(rng) ? "WARRIOR" : "ROGUE";
  p.background = maybe_empty_text(rng);
  for (std::size_t i = 0, n = 1 + below(rng, 4); i < n; ++i) {
    p.main_attributes["attr_" + std::to_string(i)] = static_cast<std::int64_t>(1 + below(rng, 30));
  }
  for (std::size_t i = 0, n = below(rng, 3); i < n && !npcs.empty(); ++i) {
    p.relationships[npcs[below(rng, npcs.size())].name] = relation_label(rng);
  }
  p.extra = extra(rng);
  return p;
}

/// Quest set whose `next` links only point forward, so the DAG is acyclic.
inline schema::QuestSet quests(Rng& rng, std::size_t n, const schema::NpcRoster& npcs) {
  schema::QuestSet out;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(quest_id(rng, i));
  for (std::size_t i = 0; i < n; ++i) {
    schema::QuestDocument q;
    q.id = ids[i];
    q.title = text(rng);
    q.quest_giver = npcs[below(rng, npcs.size())].name;
    q.objectives = texts(rng, 1);
    if (coin(rng)) {
      schema::QuestConnection c;
      std::set<std::string> seen;
      for (std::size_t k = 0, m = below(rng, 3); k < m && i + 1 < n; ++k) {
        const auto& target = ids[i + 1 + below(rng, n - i - 1)];
        if (seen.insert(target).second) c.next.push_back(target);
      }
      c.extra = extra(rng);
      q.connections = std::move(c);
    }
    if (coin(rng)) q.rewards = texts(rng);
    if (below(rng, 4) == 0) {
      q.dialogue = std::vector<schema::DialogueTurn>{{npcs[0].name, text(rng), extra(rng)}};
    }
    q.extra = extra(rng);
    out.push_back(std::move(q));
  }
  return out;
}

inline schema::QuestDocument extended(Rng& rng, const schema::QuestDocument& source, const schema::NpcRoster& npcs,
                                      const std::string& player_name) {
  auto e = source;
  e.objectives.push_back(text(rng));
  std::vector<schema::DialogueTurn> turns;
  for (std::size_t i = 0, n = 1 + below(rng, 3); i < n; ++i) {
    const auto& speaker = coin(rng) ? player_name : npcs[below(rng, npcs.size())].name;
    turns.push_back({speaker, text(rng), extra(rng)});
  }
  e.dialogue = std::move(turns);
  if (coin(rng)) e.rewards = texts(rng, 1);
  e.extra = extra(rng);
  return e;
}

/// A complete, internally consistent run.
inline RunState run_state(Rng& rng, std::size_t npc_count = 0, std::size_t quest_count = 0) {
  RunState s;
  s.world = world(rng);
  s.npcs = roster(rng, npc_count ? npc_count : 2 + below(rng, 6));
  s.player = player(rng, *s.npcs);
  s.quests = quests(rng, quest_count ? quest_count : 1 + below(rng, 6), *s.npcs);
  for (const auto& q : *s.quests) s.extended[q.id] = extended(rng, q, *s.npcs, s.player->name);
  return s;
}

}  // namespace gen

// ---------------------------------------------------------------------------
// Scripting helpers

/// Wraps a document the way models tend to, chosen by `style`.
inline std::string wrap(const json& doc, int style) {
  const auto body = doc.dump(2);
  switch (style % 4) {
    case 0: return "Here you go:\n```json\n" + body + "\n```\n";
    case 1: return body;
    case 2: return "Sure! " + body + " Hope this helps.";
    default: return "```\n" + body + "\n```";
  }
}

/// Scripted responses that reproduce `state` through the pipeline.
inline provider::FixtureScript script_for(const RunState& state) {
  std::vector<provider::FixtureEntry> entries;
  entries.push_back({"world", wrap(json(*state.world), 0)});
  entries.push_back({"npcs", wrap(json(*state.npcs), 1)});
  entries.push_back({"player", wrap(json(*state.player), 2)});
  entries.push_back({"quests", wrap(json(*state.quests), 3)});
  int style = 0;
  for (const auto& q : *state.quests) {
    entries.push_back({"extended:" + q.id, wrap(json(state.extended.at(q.id)), style++)});
  }
  return provider::FixtureScript(std::move(entries));
}

inline RunConfig config_for(const std::string& run_id, std::size_t npcs = 10, std::size_t quests = 10) {
  RunConfig c;
  c.run_id = run_id;
  c.npcs = npcs;
  c.quests = quests;
  return c;
}

/// No-op sleeper so retry tests never wait.
inline provider::Sleeper no_sleep(std::vector<std::chrono::milliseconds>* log = nullptr) {
  return [log](std::chrono::milliseconds d) {
    if (log) log->push_back(d);
  };
}

}  // namespace qf_test
