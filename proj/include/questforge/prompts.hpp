#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "questforge/default_templates.hpp"
#include "questforge/run_state.hpp"
#include "questforge/schema.hpp"
#include "questforge/stage.hpp"

namespace questforge::prompts {

inline constexpr std::array<std::string_view, 8> kPlaceholders = {
    "world", "npcs", "player", "quests", "target_quest", "user_intent", "npc_count", "quest_count"};

inline bool is_placeholder(std::string_view name) {
  return std::find(kPlaceholders.begin(), kPlaceholders.end(), name) != kPlaceholders.end();
}

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnboundPlaceholder : public std::runtime_error {
 public:
  explicit UnboundPlaceholder(std::string name)
      : std::runtime_error("placeholder {{" + name + "}} has no value in the context bundle"),
        name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class MissingDependency : public std::runtime_error {
 public:
  MissingDependency(StageKind stage, StageKind missing)
      : std::runtime_error(std::string(stage_name(stage)) + " requires a " +
                           std::string(stage_name(missing)) + " artifact"),
        stage_(stage), missing_(missing) {}
  StageKind stage() const { return stage_; }
  StageKind missing() const { return missing_; }

 private:
  StageKind stage_;
  StageKind missing_;
};

namespace detail {

/// Calls `on_placeholder(name)` for each "{{name}}" and `on_text(chunk)` for
/// the text between them.
template <class OnText, class OnPlaceholder>
void scan_template(std::string_view text, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    on_text(text.substr(pos, open - pos));
    on_placeholder(text.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
  on_text(text.substr(pos));
}

}  // namespace detail

/// A system/user prompt pair for one stage. The user text may reference the
/// names in kPlaceholders as {{name}}.
class PromptTemplate {
 public:
  PromptTemplate(StageKind stage, std::string system_text, std::string user_text)
      : stage_(stage), system_text_(std::move(system_text)), user_text_(std::move(user_text)) {
    detail::scan_template(
        user_text_, [](std::string_view) {},
        [this](std::string_view name) {
          if (!is_placeholder(name)) {
            throw TemplateError("template for " + std::string(stage_name(stage_)) +
                                " uses unknown placeholder {{" + std::string(name) + "}}");
          }
          if (std::find(placeholders_.begin(), placeholders_.end(), name) == placeholders_.end()) {
            placeholders_.emplace_back(name);
          }
        });
    if (system_text_.find("valid JSON") == std::string::npos) {
      throw TemplateError("system text for " + std::string(stage_name(stage_)) +
                          " must instruct the model to return only valid JSON");
    }
  }

  StageKind stage() const { return stage_; }
  const std::string& system_text() const { return system_text_; }
  const std::string& user_text() const { return user_text_; }
  const std::vector<std::string>& placeholders() const { return placeholders_; }

 private:
  StageKind stage_;
  std::string system_text_;
  std::string user_text_;
  std::vector<std::string> placeholders_;
};

class TemplateSet {
 public:
  void put(PromptTemplate t) {
    const auto stage = t.stage();
    templates_.insert_or_assign(stage, std::move(t));
  }
  const PromptTemplate& at(StageKind stage) const {
    auto it = templates_.find(stage);
    if (it == templates_.end()) throw TemplateError("no template for " + std::string(stage_name(stage)));
    return it->second;
  }
  bool contains(StageKind stage) const { return templates_.count(stage) != 0; }

 private:
  std::map<StageKind, PromptTemplate> templates_;
};

/// The templates compiled into the library (same text as templates/ in the repo).
inline TemplateSet default_templates() {
  TemplateSet set;
  for (StageKind stage : kStageOrder) {
    const auto text = defaults::for_stage(stage);
    set.put(PromptTemplate(stage, std::string(text.system), std::string(text.user)));
  }
  return set;
}

/// Loads `<dir>/<stage>/{system,user}.txt` for every stage.
inline TemplateSet load_templates(const std::filesystem::path& dir) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw TemplateError("cannot read template file " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  TemplateSet set;
  for (StageKind stage : kStageOrder) {
    const auto stage_dir = dir / std::string(stage_tag(stage));
    set.put(PromptTemplate(stage, slurp(stage_dir / "system.txt"), slurp(stage_dir / "user.txt")));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Context

/// Which NPCs the player stage sees.
struct SubsetPolicy {
  enum class Mode { All, FirstK, Named };
  Mode mode = Mode::All;
  std::size_t k = 0;
  std::vector<std::string> names;

  static SubsetPolicy all() { return {}; }
  static SubsetPolicy first_k(std::size_t k) {
    if (k < 1) throw std::invalid_argument("FirstK subset needs k >= 1");
    return {Mode::FirstK, k, {}};
  }
  static SubsetPolicy named(std::vector<std::string> names) { return {Mode::Named, 0, std::move(names)}; }

  bool operator==(const SubsetPolicy&) const = default;
};

inline std::string to_string(const SubsetPolicy& p) {
  switch (p.mode) {
    case SubsetPolicy::Mode::All: return "all";
    case SubsetPolicy::Mode::FirstK: return "first:" + std::to_string(p.k);
    case SubsetPolicy::Mode::Named: {
      std::string out = "named:";
      for (std::size_t i = 0; i < p.names.size(); ++i) out += (i ? "," : "") + p.names[i];
      return out;
    }
  }
  return "all";
}

/// Parses "all", "first:<k>" or "named:<a>,<b>,...".
inline SubsetPolicy parse_subset_policy(std::string_view text) {
  if (text == "all") return SubsetPolicy::all();
  if (text.rfind("first:", 0) == 0) {
    const auto digits = std::string(text.substr(6));
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("bad subset policy '" + std::string(text) + "'");
    }
    return SubsetPolicy::first_k(std::stoul(digits));
  }
  if (text.rfind("named:", 0) == 0) {
    std::vector<std::string> names;
    std::string item;
    std::istringstream in{std::string(text.substr(6))};
    while (std::getline(in, item, ',')) {
      if (!item.empty()) names.push_back(item);
    }
    if (names.empty()) throw std::invalid_argument("named subset policy needs at least one name");
    return SubsetPolicy::named(std::move(names));
  }
  throw std::invalid_argument("bad subset policy '" + std::string(text) + "'");
}

inline schema::NpcRoster select_npcs(const schema::NpcRoster& roster, const SubsetPolicy& policy) {
  switch (policy.mode) {
    case SubsetPolicy::Mode::All: return roster;
    case SubsetPolicy::Mode::FirstK: {
      if (policy.k < 1) throw std::invalid_argument("FirstK subset needs k >= 1");
      const auto n = std::min(policy.k, roster.size());
      return {roster.begin(), roster.begin() + static_cast<std::ptrdiff_t>(n)};
    }
    case SubsetPolicy::Mode::Named: {
      schema::NpcRoster out;
      for (const auto& name : policy.names) {
        auto it = std::find_if(roster.begin(), roster.end(),
                               [&](const schema::NpcDocument& n) { return n.name == name; });
        if (it == roster.end()) throw std::invalid_argument("NPC '" + name + "' is not in the roster");
        out.push_back(*it);
      }
      return out;
    }
  }
  return roster;
}

/// Serialized inputs for one prompt. Artifact fields hold canonical JSON text.
struct ContextBundle {
  std::optional<std::string> world;
  std::optional<std::string> npcs;
  std::optional<std::string> player;
  std::optional<std::string> quests;
  std::optional<std::string> target_quest;
  std::optional<std::string> user_intent;
  std::optional<std::size_t> npc_count;
  std::optional<std::size_t> quest_count;

  std::optional<std::string> lookup(std::string_view name) const {
    if (name == "world") return world;
    if (name == "npcs") return npcs;
    if (name == "player") return player;
    if (name == "quests") return quests;
    if (name == "target_quest") return target_quest;
    if (name == "user_intent") return user_intent;
    if (name == "npc_count" && npc_count) return std::to_string(*npc_count);
    if (name == "quest_count" && quest_count) return std::to_string(*quest_count);
    return std::nullopt;
  }

  bool operator==(const ContextBundle&) const = default;
};

struct ContextOptions {
  SubsetPolicy policy;
  std::string user_intent;
  std::size_t npc_count = 10;
  std::size_t quest_count = 10;
  /// Required for ExtendedQuest: id of the campaign quest to expand.
  std::string target_quest_id;
};

/// Assembles the context for `stage` from every earlier artifact:
///   World         -> user intent only
///   NpcRoster     -> world
///   Player        -> world + NPC subset
///   QuestSet      -> world + roster + player
///   ExtendedQuest -> world + roster + player + quest set + target quest
inline ContextBundle build_context(StageKind stage, const RunState& state, const ContextOptions& options) {
  for (StageKind earlier : kStageOrder) {
    if (stage_index(earlier) >= stage_index(stage) || earlier == StageKind::ExtendedQuest) break;
    if (!state.has(earlier)) throw MissingDependency(stage, earlier);
  }
  ContextBundle bundle;
  switch (stage) {
    case StageKind::World:
      bundle.user_intent = options.user_intent;
      break;
    case StageKind::NpcRoster:
      bundle.world = schema::canonical_serialize(*state.world);
      bundle.npc_count = options.npc_count;
      break;
    case StageKind::Player:
      bundle.world = schema::canonical_serialize(*state.world);
      bundle.npcs = schema::canonical_serialize(select_npcs(*state.npcs, options.policy));
      break;
    case StageKind::QuestSet:
      bundle.world = schema::canonical_serialize(*state.world);
      bundle.npcs = schema::canonical_serialize(*state.npcs);
      bundle.player = schema::canonical_serialize(*state.player);
      bundle.quest_count = options.quest_count;
      break;
    case StageKind::ExtendedQuest: {
      const auto* target = state.find_quest(options.target_quest_id);
      if (!target) throw std::invalid_argument("quest '" + options.target_quest_id + "' is not in the quest set");
      bundle.world = schema::canonical_serialize(*state.world);
      bundle.npcs = schema::canonical_serialize(*state.npcs);
      bundle.player = schema::canonical_serialize(*state.player);
      bundle.quests = schema::canonical_serialize(*state.quests);
      bundle.target_quest = schema::canonical_serialize(*target);
      break;
    }
  }
  return bundle;
}

struct RenderedPrompt {
  std::string system_message;
  std::string user_message;
  bool operator==(const RenderedPrompt&) const = default;
};

inline RenderedPrompt render(const PromptTemplate& tmpl, const ContextBundle& bundle) {
  RenderedPrompt out;
  out.system_message = tmpl.system_text();
  detail::scan_template(
      tmpl.user_text(), [&](std::string_view chunk) { out.user_message.append(chunk); },
      [&](std::string_view name) {
        auto value = bundle.lookup(name);
        if (!value) throw UnboundPlaceholder(std::string(name));
        out.user_message.append(*value);
      });
  return out;
}

}  // namespace questforge::prompts
