#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "questforge/stage.hpp"

namespace questforge::schema {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Validation report

enum class Severity { Error, Warning, Info };

constexpr std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Info: return "info";
  }
  return "unknown";
}

inline std::optional<Severity> parse_severity(std::string_view text) {
  if (text == "error") return Severity::Error;
  if (text == "warning") return Severity::Warning;
  if (text == "info") return Severity::Info;
  return std::nullopt;
}

/// Machine-readable finding codes emitted by validation.
namespace codes {
inline constexpr std::string_view kMissingField = "MissingField";
inline constexpr std::string_view kWrongType = "WrongType";
inline constexpr std::string_view kEmptyValue = "EmptyValue";
inline constexpr std::string_view kDuplicateName = "DuplicateName";
inline constexpr std::string_view kDuplicateId = "DuplicateId";
inline constexpr std::string_view kInvalidId = "InvalidId";
inline constexpr std::string_view kAttributeRange = "AttributeRange";
inline constexpr std::string_view kAttributeHigh = "AttributeHigh";
inline constexpr std::string_view kSelfRelation = "SelfRelation";
inline constexpr std::string_view kUnknownField = "UnknownField";
inline constexpr std::string_view kNonCanonicalClass = "NonCanonicalClass";
inline constexpr std::string_view kUnwrappedCollection = "UnwrappedCollection";
inline constexpr std::string_view kCountMismatch = "CountMismatch";
inline constexpr std::string_view kIdMismatch = "IdMismatch";
}  // namespace codes

struct Finding {
  Severity severity = Severity::Error;
  std::string path;
  std::string code;
  std::string message;

  bool operator==(const Finding&) const = default;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool valid() const {
    return std::none_of(findings.begin(), findings.end(),
                        [](const Finding& f) { return f.severity == Severity::Error; });
  }
  std::size_t count(Severity s) const {
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(), [s](const Finding& f) { return f.severity == s; }));
  }
  bool has_code(std::string_view code) const {
    return std::any_of(findings.begin(), findings.end(),
                       [code](const Finding& f) { return f.code == code; });
  }
  void add(Severity s, std::string path, std::string_view code, std::string message) {
    findings.push_back({s, std::move(path), std::string(code), std::move(message)});
  }
  void merge(const ValidationReport& other) {
    findings.insert(findings.end(), other.findings.begin(), other.findings.end());
  }

  bool operator==(const ValidationReport&) const = default;
};

inline void to_json(json& j, const Finding& f) {
  j = json{{"severity", severity_name(f.severity)},
           {"path", f.path},
           {"code", f.code},
           {"message", f.message}};
}

inline void to_json(json& j, const ValidationReport& r) {
  j = json{{"valid", r.valid()}, {"findings", r.findings}};
}

inline ValidationReport report_from_json(const json& j) {
  ValidationReport r;
  for (const auto& f : j.at("findings")) {
    r.add(parse_severity(f.at("severity").get<std::string>()).value_or(Severity::Error),
          f.at("path").get<std::string>(), f.at("code").get<std::string>(),
          f.at("message").get<std::string>());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Documents. Every record keeps the keys it does not model in `extra` so that
// fuller model output survives a decode/encode cycle unchanged.

struct Surrounding {
  std::string name;
  std::string type;
  std::string resources;
  std::string dependencies;
  std::vector<std::string> related_factions;
  json extra = json::object();
  bool operator==(const Surrounding&) const = default;
};

struct Building {
  std::string name;
  std::string type;
  std::string district;
  std::string controlled_by;
  json extra = json::object();
  bool operator==(const Building&) const = default;
};

struct Faction {
  std::string name;
  std::string type;
  std::string goals;
  std::string rivals;
  json extra = json::object();
  bool operator==(const Faction&) const = default;
};

struct WorldDocument {
  std::string city;
  std::vector<Surrounding> surroundings;
  std::vector<Building> buildings;
  std::vector<Faction> politics;
  json extra = json::object();
  bool operator==(const WorldDocument&) const = default;
};

struct RelationLink {
  std::string npc_name;
  std::string relation_type;
  json extra = json::object();
  bool operator==(const RelationLink&) const = default;
};

struct NpcDocument {
  std::string name;
  std::string role;
  std::vector<std::string> traits;
  std::vector<std::string> skills;
  std::vector<std::string> flaws;
  std::vector<std::string> secrets;
  std::vector<RelationLink> relations;
  json extra = json::object();
  bool operator==(const NpcDocument&) const = default;
};

struct PlayerDocument {
  std::string name;
  std::string player_class;  // "class" on the wire
  std::string background;
  std::map<std::string, std::int64_t> main_attributes;
  std::map<std::string, std::string> relationships;
  json extra = json::object();
  bool operator==(const PlayerDocument&) const = default;
};

struct QuestConnection {
  std::vector<std::string> next;
  json extra = json::object();
  bool operator==(const QuestConnection&) const = default;
};

struct DialogueTurn {
  std::string speaker;
  std::string content;
  json extra = json::object();
  bool operator==(const DialogueTurn&) const = default;
};

struct QuestDocument {
  std::string id;
  std::string title;
  std::string quest_giver;
  std::vector<std::string> objectives;
  std::optional<QuestConnection> connections;
  std::optional<std::vector<std::string>> rewards;
  std::optional<std::vector<DialogueTurn>> dialogue;
  json extra = json::object();
  bool operator==(const QuestDocument&) const = default;
};

using NpcRoster = std::vector<NpcDocument>;
using QuestSet = std::vector<QuestDocument>;

/// Maps a stage to the document type it produces.
template <StageKind K> struct stage_document;
template <> struct stage_document<StageKind::World> { using type = WorldDocument; };
template <> struct stage_document<StageKind::NpcRoster> { using type = NpcRoster; };
template <> struct stage_document<StageKind::Player> { using type = PlayerDocument; };
template <> struct stage_document<StageKind::QuestSet> { using type = QuestSet; };
template <> struct stage_document<StageKind::ExtendedQuest> { using type = QuestDocument; };
template <StageKind K> using stage_document_t = typename stage_document<K>::type;

/// Relation labels observed in generated rosters; anything else is still valid.
inline const std::set<std::string>& known_relation_labels() {
  static const std::set<std::string> labels{"Conflict", "Rivalry", "Cooperation", "Mentor",
                                            "Rival"};
  return labels;
}

inline constexpr std::int64_t kAttributeWarnAbove = 30;

// ---------------------------------------------------------------------------
// Encoding

inline void to_json(json& j, const Surrounding& s) {
  j = s.extra.is_object() ? s.extra : json::object();
  j["name"] = s.name;
  j["type"] = s.type;
  j["resources"] = s.resources;
  j["dependencies"] = s.dependencies;
  j["related_factions"] = s.related_factions;
}

inline void to_json(json& j, const Building& b) {
  j = b.extra.is_object() ? b.extra : json::object();
  j["name"] = b.name;
  j["type"] = b.type;
  j["district"] = b.district;
  j["controlled_by"] = b.controlled_by;
}

inline void to_json(json& j, const Faction& f) {
  j = f.extra.is_object() ? f.extra : json::object();
  j["name"] = f.name;
  j["type"] = f.type;
  j["goals"] = f.goals;
  j["rivals"] = f.rivals;
}

inline void to_json(json& j, const WorldDocument& w) {
  j = w.extra.is_object() ? w.extra : json::object();
  j["city"] = w.city;
  j["surroundings"] = w.surroundings;
  j["buildings"] = w.buildings;
  j["politics"] = w.politics;
}

inline void to_json(json& j, const RelationLink& r) {
  j = r.extra.is_object() ? r.extra : json::object();
  j["npc_name"] = r.npc_name;
  j["relation_type"] = r.relation_type;
}

inline void to_json(json& j, const NpcDocument& n) {
  j = n.extra.is_object() ? n.extra : json::object();
  j["name"] = n.name;
  j["role"] = n.role;
  j["traits"] = n.traits;
  j["skills"] = n.skills;
  j["flaws"] = n.flaws;
  j["secrets"] = n.secrets;
  j["relations"] = n.relations;
}

inline void to_json(json& j, const PlayerDocument& p) {
  j = p.extra.is_object() ? p.extra : json::object();
  j["name"] = p.name;
  j["class"] = p.player_class;
  j["background"] = p.background;
  j["main_attributes"] = p.main_attributes;
  j["relationships"] = p.relationships;
}

inline void to_json(json& j, const QuestConnection& c) {
  j = c.extra.is_object() ? c.extra : json::object();
  j["next"] = c.next;
}

inline void to_json(json& j, const DialogueTurn& d) {
  j = d.extra.is_object() ? d.extra : json::object();
  j["speaker"] = d.speaker;
  j["content"] = d.content;
}

inline void to_json(json& j, const QuestDocument& q) {
  j = q.extra.is_object() ? q.extra : json::object();
  j["id"] = q.id;
  j["title"] = q.title;
  j["quest_giver"] = q.quest_giver;
  j["objectives"] = q.objectives;
  if (q.connections) j["connections"] = *q.connections;
  if (q.rewards) j["rewards"] = *q.rewards;
  if (q.dialogue) j["dialogue"] = *q.dialogue;
}

/// Deterministic text form: lexicographic key order, 2-space indent, UTF-8.
inline std::string canonical_serialize(const json& doc) { return doc.dump(2); }

template <class Document>
std::string canonical_serialize(const Document& doc) {
  return canonical_serialize(json(doc));
}

// ---------------------------------------------------------------------------
// Decoding with validation

namespace detail {

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}
inline std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

inline bool is_quest_id(std::string_view id) {
  std::size_t i = 0;
  while (i < id.size() && std::isalpha(static_cast<unsigned char>(id[i]))) ++i;
  if (i == 0 || i == id.size()) return false;
  return std::all_of(id.begin() + static_cast<std::ptrdiff_t>(i), id.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

enum class Need { Required, Optional };
enum class Empty { Allowed, Error, Warning };

class Decoder {
 public:
  explicit Decoder(ValidationReport& report) : report_(report) {}

  void error(std::string path, std::string_view code, std::string msg) {
    report_.add(Severity::Error, std::move(path), code, std::move(msg));
  }
  void warning(std::string path, std::string_view code, std::string msg) {
    report_.add(Severity::Warning, std::move(path), code, std::move(msg));
  }
  void info(std::string path, std::string_view code, std::string msg) {
    report_.add(Severity::Info, std::move(path), code, std::move(msg));
  }

  bool expect_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    error(path, codes::kWrongType, "expected an object, got " + std::string(j.type_name()));
    return false;
  }

  // Returns the member or nullptr, reporting MissingField when required.
  const json* member(const json& obj, std::string_view key, const std::string& path, Need need) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (need == Need::Required) {
        error(join(path, key), codes::kMissingField, "required field '" + std::string(key) + "' is missing");
      }
      return nullptr;
    }
    return &*it;
  }

  std::string text(const json& value, const std::string& path, Empty empty) {
    if (!value.is_string()) {
      error(path, codes::kWrongType, "expected a string, got " + std::string(value.type_name()));
      return {};
    }
    auto s = value.get<std::string>();
    if (is_blank(s)) {
      if (empty == Empty::Error) error(path, codes::kEmptyValue, "must not be empty");
      if (empty == Empty::Warning) warning(path, codes::kEmptyValue, "empty string");
    }
    return s;
  }

  std::string text_field(const json& obj, std::string_view key, const std::string& path, Empty empty) {
    const json* v = member(obj, key, path, Need::Required);
    return v ? text(*v, join(path, key), empty) : std::string{};
  }

  std::vector<std::string> text_list(const json& value, const std::string& path,
                                     bool require_entries, Empty entry_empty) {
    std::vector<std::string> out;
    if (!value.is_array()) {
      error(path, codes::kWrongType, "expected an array, got " + std::string(value.type_name()));
      return out;
    }
    if (require_entries && value.empty()) error(path, codes::kEmptyValue, "must contain at least one entry");
    for (std::size_t i = 0; i < value.size(); ++i) out.push_back(text(value[i], index(path, i), entry_empty));
    return out;
  }

  std::vector<std::string> text_list_field(const json& obj, std::string_view key, const std::string& path,
                                           bool require_entries, Empty entry_empty) {
    const json* v = member(obj, key, path, Need::Required);
    return v ? text_list(*v, join(path, key), require_entries, entry_empty) : std::vector<std::string>{};
  }

  // Collects members not in `known` and reports them as warnings.
  json extras(const json& obj, std::initializer_list<std::string_view> known, const std::string& path) {
    json out = json::object();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const bool is_known = std::find(known.begin(), known.end(), it.key()) != known.end();
      if (!is_known) {
        warning(join(path, it.key()), codes::kUnknownField, "field not in schema; preserved");
        out[it.key()] = it.value();
      }
    }
    return out;
  }

  // Decodes an array of records, requiring ≥1 entry when asked, and checks
  // the uniqueness of `name_of(record)`.
  template <class T, class DecodeOne, class NameOf>
  std::vector<T> records(const json& obj, std::string_view key, const std::string& path, bool require_entries,
                         DecodeOne decode_one, NameOf name_of, std::string_view dup_code) {
    std::vector<T> out;
    const json* v = member(obj, key, path, Need::Required);
    if (!v) return out;
    const auto list_path = join(path, key);
    if (!v->is_array()) {
      error(list_path, codes::kWrongType, "expected an array, got " + std::string(v->type_name()));
      return out;
    }
    if (require_entries && v->empty()) error(list_path, codes::kEmptyValue, "must contain at least one entry");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto item_path = index(list_path, i);
      T item = decode_one(*this, (*v)[i], item_path);
      const std::string& name = name_of(item);
      if (!name.empty() && !seen.insert(name).second) {
        error(item_path, dup_code, "duplicate '" + name + "'");
      }
      out.push_back(std::move(item));
    }
    return out;
  }

 private:
  ValidationReport& report_;
};

inline Surrounding decode_surrounding(Decoder& d, const json& j, const std::string& path) {
  Surrounding s;
  if (!d.expect_object(j, path)) return s;
  s.name = d.text_field(j, "name", path, Empty::Error);
  s.type = d.text_field(j, "type", path, Empty::Allowed);
  s.resources = d.text_field(j, "resources", path, Empty::Allowed);
  s.dependencies = d.text_field(j, "dependencies", path, Empty::Allowed);
  s.related_factions = d.text_list_field(j, "related_factions", path, false, Empty::Error);
  s.extra = d.extras(j, {"name", "type", "resources", "dependencies", "related_factions"}, path);
  return s;
}

inline Building decode_building(Decoder& d, const json& j, const std::string& path) {
  Building b;
  if (!d.expect_object(j, path)) return b;
  b.name = d.text_field(j, "name", path, Empty::Error);
  b.type = d.text_field(j, "type", path, Empty::Allowed);
  b.district = d.text_field(j, "district", path, Empty::Allowed);
  b.controlled_by = d.text_field(j, "controlled_by", path, Empty::Allowed);
  b.extra = d.extras(j, {"name", "type", "district", "controlled_by"}, path);
  return b;
}

inline Faction decode_faction(Decoder& d, const json& j, const std::string& path) {
  Faction f;
  if (!d.expect_object(j, path)) return f;
  f.name = d.text_field(j, "name", path, Empty::Error);
  f.type = d.text_field(j, "type", path, Empty::Allowed);
  f.goals = d.text_field(j, "goals", path, Empty::Allowed);
  f.rivals = d.text_field(j, "rivals", path, Empty::Allowed);
  f.extra = d.extras(j, {"name", "type", "goals", "rivals"}, path);
  return f;
}

inline WorldDocument decode_world(Decoder& d, const json& j, const std::string& path) {
  WorldDocument w;
  if (!d.expect_object(j, path)) return w;
  w.city = d.text_field(j, "city", path, Empty::Error);
  w.surroundings = d.records<Surrounding>(j, "surroundings", path, true, decode_surrounding,
                                          [](const Surrounding& s) -> const std::string& { return s.name; },
                                          codes::kDuplicateName);
  w.buildings = d.records<Building>(j, "buildings", path, true, decode_building,
                                    [](const Building& b) -> const std::string& { return b.name; },
                                    codes::kDuplicateName);
  w.politics = d.records<Faction>(j, "politics", path, true, decode_faction,
                                  [](const Faction& f) -> const std::string& { return f.name; },
                                  codes::kDuplicateName);
  w.extra = d.extras(j, {"city", "surroundings", "buildings", "politics"}, path);
  return w;
}

inline RelationLink decode_relation(Decoder& d, const json& j, const std::string& path) {
  RelationLink r;
  if (!d.expect_object(j, path)) return r;
  r.npc_name = d.text_field(j, "npc_name", path, Empty::Error);
  r.relation_type = d.text_field(j, "relation_type", path, Empty::Error);
  r.extra = d.extras(j, {"npc_name", "relation_type"}, path);
  return r;
}

inline NpcDocument decode_npc(Decoder& d, const json& j, const std::string& path) {
  NpcDocument n;
  if (!d.expect_object(j, path)) return n;
  n.name = d.text_field(j, "name", path, Empty::Error);
  n.role = d.text_field(j, "role", path, Empty::Allowed);
  n.traits = d.text_list_field(j, "traits", path, false, Empty::Warning);
  n.skills = d.text_list_field(j, "skills", path, false, Empty::Warning);
  n.flaws = d.text_list_field(j, "flaws", path, false, Empty::Warning);
  n.secrets = d.text_list_field(j, "secrets", path, false, Empty::Warning);
  if (const json* rel = d.member(j, "relations", path, Need::Required)) {
    const auto rel_path = join(path, "relations");
    if (!rel->is_array()) {
      d.error(rel_path, codes::kWrongType, "expected an array, got " + std::string(rel->type_name()));
    } else {
      for (std::size_t i = 0; i < rel->size(); ++i) {
        const auto item_path = index(rel_path, i);
        auto link = decode_relation(d, (*rel)[i], item_path);
        if (!n.name.empty() && link.npc_name == n.name) {
          d.error(join(item_path, "npc_name"), codes::kSelfRelation, "an NPC cannot relate to itself");
        }
        n.relations.push_back(std::move(link));
      }
    }
  }
  n.extra = d.extras(j, {"name", "role", "traits", "skills", "flaws", "secrets", "relations"}, path);
  return n;
}

inline PlayerDocument decode_player(Decoder& d, const json& j, const std::string& path) {
  PlayerDocument p;
  if (!d.expect_object(j, path)) return p;
  p.name = d.text_field(j, "name", path, Empty::Error);
  p.player_class = d.text_field(j, "class", path, Empty::Error);
  if (!p.player_class.empty()) {
    const bool upper = std::none_of(p.player_class.begin(), p.player_class.end(),
                                    [](unsigned char c) { return std::islower(c) != 0; });
    if (!upper) d.info(join(path, "class"), codes::kNonCanonicalClass, "class labels are canonically uppercase");
  }
  p.background = d.text_field(j, "background", path, Empty::Allowed);
  if (const json* attrs = d.member(j, "main_attributes", path, Need::Required)) {
    const auto attr_path = join(path, "main_attributes");
    if (d.expect_object(*attrs, attr_path)) {
      if (attrs->empty()) d.error(attr_path, codes::kEmptyValue, "must contain at least one attribute");
      for (auto it = attrs->begin(); it != attrs->end(); ++it) {
        const auto key_path = join(attr_path, it.key());
        if (!it.value().is_number_integer()) {
          d.error(key_path, codes::kWrongType, "attribute values must be integers");
          continue;
        }
        const auto value = it.value().get<std::int64_t>();
        if (value < 1) {
          d.error(key_path, codes::kAttributeRange, "attribute values must be >= 1");
        } else if (value > kAttributeWarnAbove) {
          d.warning(key_path, codes::kAttributeHigh, "attribute value above " + std::to_string(kAttributeWarnAbove));
        }
        p.main_attributes[it.key()] = value;
      }
    }
  }
  if (const json* rel = d.member(j, "relationships", path, Need::Required)) {
    const auto rel_path = join(path, "relationships");
    if (d.expect_object(*rel, rel_path)) {
      for (auto it = rel->begin(); it != rel->end(); ++it) {
        if (is_blank(it.key())) d.error(rel_path, codes::kEmptyValue, "relationship keys must be non-empty");
        if (!p.name.empty() && it.key() == p.name) {
          d.error(join(rel_path, it.key()), codes::kSelfRelation, "the player cannot relate to itself");
        }
        p.relationships[it.key()] = d.text(it.value(), join(rel_path, it.key()), Empty::Error);
      }
    }
  }
  p.extra = d.extras(j, {"name", "class", "background", "main_attributes", "relationships"}, path);
  return p;
}

enum class QuestForm { Campaign, Extended };

inline QuestDocument decode_quest(Decoder& d, const json& j, const std::string& path, QuestForm form) {
  QuestDocument q;
  if (!d.expect_object(j, path)) return q;
  q.id = d.text_field(j, "id", path, Empty::Error);
  if (!q.id.empty() && !is_quest_id(q.id)) {
    d.error(join(path, "id"), codes::kInvalidId, "quest ids are letters followed by digits, got '" + q.id + "'");
  }
  q.title = d.text_field(j, "title", path, Empty::Error);
  q.quest_giver = d.text_field(j, "quest_giver", path, Empty::Error);
  q.objectives = d.text_list_field(j, "objectives", path, true, Empty::Error);

  if (const json* conn = d.member(j, "connections", path, Need::Optional)) {
    const auto conn_path = join(path, "connections");
    QuestConnection c;
    if (d.expect_object(*conn, conn_path)) {
      c.next = d.text_list_field(*conn, "next", conn_path, false, Empty::Error);
      std::set<std::string> seen;
      for (std::size_t i = 0; i < c.next.size(); ++i) {
        if (!c.next[i].empty() && !seen.insert(c.next[i]).second) {
          d.error(index(join(conn_path, "next"), i), codes::kDuplicateId, "duplicate successor '" + c.next[i] + "'");
        }
      }
      c.extra = d.extras(*conn, {"next"}, conn_path);
    }
    q.connections = std::move(c);
  }
  if (const json* rewards = d.member(j, "rewards", path, Need::Optional)) {
    q.rewards = d.text_list(*rewards, join(path, "rewards"), false, Empty::Warning);
  }
  const Need dialogue_need = form == QuestForm::Extended ? Need::Required : Need::Optional;
  if (const json* dlg = d.member(j, "dialogue", path, dialogue_need)) {
    const auto dlg_path = join(path, "dialogue");
    std::vector<DialogueTurn> turns;
    if (!dlg->is_array()) {
      d.error(dlg_path, codes::kWrongType, "expected an array, got " + std::string(dlg->type_name()));
    } else {
      if (form == QuestForm::Extended && dlg->empty()) {
        d.error(dlg_path, codes::kEmptyValue, "extended quests carry at least one dialogue turn");
      }
      for (std::size_t i = 0; i < dlg->size(); ++i) {
        const auto turn_path = index(dlg_path, i);
        DialogueTurn t;
        if (d.expect_object((*dlg)[i], turn_path)) {
          t.speaker = d.text_field((*dlg)[i], "speaker", turn_path, Empty::Error);
          t.content = d.text_field((*dlg)[i], "content", turn_path, Empty::Error);
          t.extra = d.extras((*dlg)[i], {"speaker", "content"}, turn_path);
        }
        turns.push_back(std::move(t));
      }
    }
    q.dialogue = std::move(turns);
  }
  q.extra = d.extras(j, {"id", "title", "quest_giver", "objectives", "connections", "rewards", "dialogue"}, path);
  return q;
}

template <class T, class DecodeOne>
std::vector<T> decode_collection(Decoder& d, const json& j, DecodeOne decode_one, std::string_view dup_code,
                                 std::string (*key_of)(const T&)) {
  std::vector<T> out;
  if (!j.is_array()) {
    d.error("", codes::kWrongType, "expected an array, got " + std::string(j.type_name()));
    return out;
  }
  if (j.empty()) d.error("", codes::kEmptyValue, "must contain at least one entry");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto item_path = index("", i);
    T item = decode_one(d, j[i], item_path);
    const auto key = key_of(item);
    if (!key.empty() && !seen.insert(key).second) d.error(item_path, dup_code, "duplicate '" + key + "'");
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace detail

/// Thrown when a typed document is requested from JSON that fails validation.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(StageKind kind, ValidationReport report)
      : std::runtime_error("document does not validate as " + std::string(stage_name(kind))),
        kind_(kind), report_(std::move(report)) {}
  StageKind kind() const { return kind_; }
  const ValidationReport& report() const { return report_; }

 private:
  StageKind kind_;
  ValidationReport report_;
};

/// Decodes `doc` as the document type of stage K, appending findings to `report`.
template <StageKind K>
stage_document_t<K> decode(const json& doc, ValidationReport& report) {
  detail::Decoder d(report);
  if constexpr (K == StageKind::World) {
    return detail::decode_world(d, doc, "");
  } else if constexpr (K == StageKind::NpcRoster) {
    return detail::decode_collection<NpcDocument>(
        d, doc, detail::decode_npc, codes::kDuplicateName, +[](const NpcDocument& n) { return n.name; });
  } else if constexpr (K == StageKind::Player) {
    return detail::decode_player(d, doc, "");
  } else if constexpr (K == StageKind::QuestSet) {
    return detail::decode_collection<QuestDocument>(
        d, doc,
        [](detail::Decoder& dd, const json& j, const std::string& p) {
          return detail::decode_quest(dd, j, p, detail::QuestForm::Campaign);
        },
        codes::kDuplicateId, +[](const QuestDocument& q) { return q.id; });
  } else {
    return detail::decode_quest(d, doc, "", detail::QuestForm::Extended);
  }
}

/// Decodes and throws SchemaError when the document has error findings.
template <StageKind K>
stage_document_t<K> parse_document(const json& doc) {
  ValidationReport report;
  auto out = decode<K>(doc, report);
  if (!report.valid()) throw SchemaError(K, std::move(report));
  return out;
}

/// Validates `doc` against the schema of `kind`. Pure; never throws.
inline ValidationReport validate(StageKind kind, const json& doc) {
  ValidationReport report;
  switch (kind) {
    case StageKind::World: decode<StageKind::World>(doc, report); break;
    case StageKind::NpcRoster: decode<StageKind::NpcRoster>(doc, report); break;
    case StageKind::Player: decode<StageKind::Player>(doc, report); break;
    case StageKind::QuestSet: decode<StageKind::QuestSet>(doc, report); break;
    case StageKind::ExtendedQuest: decode<StageKind::ExtendedQuest>(doc, report); break;
  }
  return report;
}

/// Single-record validators with paths relative to the record.
inline ValidationReport validate_npc(const json& doc) {
  ValidationReport report;
  detail::Decoder d(report);
  detail::decode_npc(d, doc, "");
  return report;
}

inline ValidationReport validate_quest(const json& doc) {
  ValidationReport report;
  detail::Decoder d(report);
  detail::decode_quest(d, doc, "", detail::QuestForm::Campaign);
  return report;
}

/// Rosters and quest sets are arrays; a model sometimes wraps the array in a
/// single-key object ({"quests": [...]}). That wrapper is removed here, with an
/// info finding, before validation.
inline json normalize(StageKind kind, const json& doc, ValidationReport* report = nullptr) {
  if (kind != StageKind::NpcRoster && kind != StageKind::QuestSet) return doc;
  if (doc.is_object() && doc.size() == 1 && doc.begin().value().is_array()) {
    if (report) {
      report->add(Severity::Info, doc.begin().key(), codes::kUnwrappedCollection,
                  "collection unwrapped from single-key object");
    }
    return doc.begin().value();
  }
  return doc;
}

}  // namespace questforge::schema
