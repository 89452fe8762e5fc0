#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace questforge::evalkit {

enum class Category { World, Npcs, PlayerCharacter, Quests, ExtendedQuests };
enum class Criterion { StructuralCompleteness, InternalConsistency, NarrativeCoherence, Diversity, Actionability };

inline constexpr std::array<Category, 5> kCategories = {Category::World, Category::Npcs, Category::PlayerCharacter,
                                                        Category::Quests, Category::ExtendedQuests};
inline constexpr std::array<Criterion, 5> kCriteria = {
    Criterion::StructuralCompleteness, Criterion::InternalConsistency, Criterion::NarrativeCoherence,
    Criterion::Diversity, Criterion::Actionability};

constexpr std::string_view category_name(Category c) {
  switch (c) {
    case Category::World: return "World";
    case Category::Npcs: return "NPCs";
    case Category::PlayerCharacter: return "Player Character";
    case Category::Quests: return "Quests";
    case Category::ExtendedQuests: return "Extended Quests";
  }
  return "?";
}

constexpr std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::StructuralCompleteness: return "StructuralCompleteness";
    case Criterion::InternalConsistency: return "InternalConsistency";
    case Criterion::NarrativeCoherence: return "NarrativeCoherence";
    case Criterion::Diversity: return "Diversity";
    case Criterion::Actionability: return "Actionability";
  }
  return "?";
}

/// Column headings of the report table.
constexpr std::string_view criterion_short(Criterion c) {
  switch (c) {
    case Criterion::StructuralCompleteness: return "Struct.";
    case Criterion::InternalConsistency: return "Consist.";
    case Criterion::NarrativeCoherence: return "Coher.";
    case Criterion::Diversity: return "Divers.";
    case Criterion::Actionability: return "Action.";
  }
  return "?";
}

namespace detail {
inline std::string fold(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}
}  // namespace detail

/// Case-, space- and punctuation-insensitive ("Player Character", "player_character").
inline std::optional<Category> parse_category(std::string_view text) {
  const auto f = detail::fold(text);
  if (f == "world") return Category::World;
  if (f == "npcs" || f == "npc") return Category::Npcs;
  if (f == "playercharacter" || f == "player") return Category::PlayerCharacter;
  if (f == "quests" || f == "quest" || f == "campaignlevelquests") return Category::Quests;
  if (f == "extendedquests" || f == "extendedquest" || f == "extended") return Category::ExtendedQuests;
  return std::nullopt;
}

inline std::optional<Criterion> parse_criterion(std::string_view text) {
  const auto f = detail::fold(text);
  for (Criterion c : kCriteria) {
    if (f == detail::fold(criterion_name(c)) || f == detail::fold(criterion_short(c))) return c;
  }
  if (f == "structure" || f == "structural") return Criterion::StructuralCompleteness;
  if (f == "consistency") return Criterion::InternalConsistency;
  if (f == "coherence") return Criterion::NarrativeCoherence;
  return std::nullopt;
}

struct ScoreRecord {
  std::string evaluator;
  std::string run;
  Category category = Category::World;
  std::string artifact;
  Criterion criterion = Criterion::StructuralCompleteness;
  int score = 0;
  std::string note;

  bool operator==(const ScoreRecord&) const = default;
};

enum class EvalErrorKind { Io, Parse, Range, DuplicateKey, EmptyCategory };

class EvalError : public std::runtime_error {
 public:
  EvalError(EvalErrorKind kind, std::size_t row, const std::string& what)
      : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what), kind_(kind), row_(row) {}
  EvalErrorKind kind() const { return kind_; }
  /// 1-based line number in the input file, 0 when not tied to a row.
  std::size_t row() const { return row_; }

 private:
  EvalErrorKind kind_;
  std::size_t row_;
};

// ---------------------------------------------------------------------------
// Ingestion

inline constexpr std::array<std::string_view, 7> kCsvHeader = {"evaluator", "run",   "category", "artifact",
                                                               "criterion", "score", "note"};

/// Splits one CSV record (RFC 4180 quoting) starting at `pos`; advances `pos`
/// past the record terminator and `line` by the newlines consumed.
inline std::vector<std::string> read_csv_record(std::string_view text, std::size_t& pos, std::size_t& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  const std::size_t start_line = line;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          fields.back().push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        fields.back().push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      ++line;
      break;
    } else if (c != '\r') {
      fields.back().push_back(c);
    }
  }
  if (quoted) throw EvalError(EvalErrorKind::Parse, start_line, "unterminated quoted field");
  return fields;
}

namespace detail {

inline std::string strip(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

inline ScoreRecord make_record(std::size_t row, std::string evaluator, std::string run, std::string_view category,
                               std::string artifact, std::string_view criterion, std::string_view score_text,
                               std::string note) {
  ScoreRecord r;
  r.evaluator = strip(evaluator);
  r.run = strip(run);
  r.artifact = strip(artifact);
  r.note = std::move(note);
  if (r.evaluator.empty()) throw EvalError(EvalErrorKind::Parse, row, "evaluator is empty");
  if (r.artifact.empty()) throw EvalError(EvalErrorKind::Parse, row, "artifact is empty");
  auto cat = parse_category(category);
  if (!cat) throw EvalError(EvalErrorKind::Parse, row, "unknown category '" + std::string(category) + "'");
  r.category = *cat;
  auto crit = parse_criterion(criterion);
  if (!crit) throw EvalError(EvalErrorKind::Parse, row, "unknown criterion '" + std::string(criterion) + "'");
  r.criterion = *crit;
  const auto s = strip(score_text);
  const bool integer = !s.empty() && s.size() <= 9 &&
                       std::all_of(s.begin() + (s[0] == '-' ? 1 : 0), s.end(),
                                   [](unsigned char c) { return std::isdigit(c) != 0; }) &&
                       s != "-";
  if (!integer) throw EvalError(EvalErrorKind::Parse, row, "score '" + s + "' is not an integer");
  r.score = std::stoi(s);
  if (r.score < 1 || r.score > 5) {
    throw EvalError(EvalErrorKind::Range, row, "score " + s + " is outside the 1-5 Likert range");
  }
  return r;
}

class DuplicateGuard {
 public:
  void check(const ScoreRecord& r, std::size_t row) {
    auto key = std::make_tuple(r.evaluator, r.run, r.artifact, r.criterion);
    auto [it, fresh] = seen_.emplace(std::move(key), row);
    if (!fresh) {
      throw EvalError(EvalErrorKind::DuplicateKey, row,
                      "duplicate score for (" + r.evaluator + ", " + r.artifact + ", " +
                          std::string(criterion_name(r.criterion)) + "), first seen on row " +
                          std::to_string(it->second));
    }
  }

 private:
  std::map<std::tuple<std::string, std::string, std::string, Criterion>, std::size_t> seen_;
};

}  // namespace detail

/// CSV with header `evaluator,run,category,artifact,criterion,score,note`
/// (the note column may be omitted).
inline std::vector<ScoreRecord> parse_scores_csv(std::string_view text) {
  std::vector<ScoreRecord> out;
  std::size_t pos = 0;
  std::size_t line = 1;
  // skip a UTF-8 byte order mark
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  bool header_seen = false;
  detail::DuplicateGuard guard;
  while (pos < text.size()) {
    const std::size_t row = line;
    auto fields = read_csv_record(text, pos, line);
    if (fields.size() == 1 && detail::strip(fields[0]).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      const bool ok = (fields.size() == 7 || fields.size() == 6) &&
                      std::equal(fields.begin(), fields.end(), kCsvHeader.begin(),
                                 [](const std::string& a, std::string_view b) { return detail::strip(a) == b; });
      if (!ok) throw EvalError(EvalErrorKind::Parse, row, "expected header evaluator,run,category,artifact,criterion,score,note");
      continue;
    }
    if (fields.size() != 7 && fields.size() != 6) {
      throw EvalError(EvalErrorKind::Parse, row, "expected 6 or 7 fields, got " + std::to_string(fields.size()));
    }
    auto record = detail::make_record(row, fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
                                      fields.size() == 7 ? fields[6] : std::string{});
    guard.check(record, row);
    out.push_back(std::move(record));
  }
  return out;
}

/// One JSON object per line with the CSV column names as keys; score is a number.
inline std::vector<ScoreRecord> parse_scores_jsonl(std::string_view text) {
  std::vector<ScoreRecord> out;
  detail::DuplicateGuard guard;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    ++row;
    pos = end + 1;
    if (detail::strip(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw EvalError(EvalErrorKind::Parse, row, "not a JSON object");
    auto str = [&](const char* key) -> std::string {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return {};
      if (!it->is_string()) throw EvalError(EvalErrorKind::Parse, row, std::string(key) + " must be a string");
      return it->get<std::string>();
    };
    std::string score_text;
    if (auto it = j.find("score"); it != j.end()) {
      if (it->is_number_integer()) {
        score_text = std::to_string(it->get<long long>());
      } else if (it->is_number_float() && std::floor(it->get<double>()) == it->get<double>()) {
        score_text = std::to_string(static_cast<long long>(it->get<double>()));
      } else if (it->is_string()) {
        score_text = it->get<std::string>();
      } else {
        score_text = it->dump();
      }
    }
    auto record = detail::make_record(row, str("evaluator"), str("run"), str("category"), str("artifact"),
                                      str("criterion"), score_text, str("note"));
    guard.check(record, row);
    out.push_back(std::move(record));
    if (end == text.size()) break;
  }
  return out;
}

/// Reads `path`, choosing JSON-lines for .jsonl/.ndjson/.json and CSV otherwise.
inline std::vector<ScoreRecord> ingest_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError(EvalErrorKind::Io, 0, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return parse_scores_jsonl(ss.str());
  return parse_scores_csv(ss.str());
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Pooling {
  /// Mean over every (evaluator x artifact) score in a cell.
  Pooled,
  /// Mean per evaluator first, then the mean of those.
  Nested
};

struct CategoryRow {
  Category category = Category::World;
  std::array<std::optional<double>, 5> means{};
  std::array<std::size_t, 5> counts{};
  /// Unweighted mean of the five criterion means; absent if any cell is absent.
  std::optional<double> overall;

  std::optional<double> mean(Criterion c) const { return means[static_cast<std::size_t>(c)]; }
};

inline std::optional<double> unweighted_mean(const std::array<std::optional<double>, 5>& means) {
  double sum = 0.0;
  for (const auto& m : means) {
    if (!m) return std::nullopt;
    sum += *m;
  }
  return sum / static_cast<double>(means.size());
}

struct AggregateTable {
  Pooling pooling = Pooling::Pooled;
  std::vector<CategoryRow> rows;

  const CategoryRow* row(Category c) const {
    for (const auto& r : rows) {
      if (r.category == c) return &r;
    }
    return nullptr;
  }

  /// Builds a table directly from per-cell means (for published tables).
  static AggregateTable from_cell_means(const std::vector<std::pair<Category, std::array<double, 5>>>& cells) {
    AggregateTable t;
    for (const auto& [category, values] : cells) {
      CategoryRow r;
      r.category = category;
      for (std::size_t i = 0; i < 5; ++i) {
        r.means[i] = values[i];
        r.counts[i] = 1;
      }
      r.overall = unweighted_mean(r.means);
      t.rows.push_back(r);
    }
    return t;
  }
};

/// Cell means per (category, criterion) and the overall average per category.
/// `categories` empty means every category present in `records`.
inline AggregateTable aggregate(const std::vector<ScoreRecord>& records, Pooling pooling = Pooling::Pooled,
                                std::vector<Category> categories = {}) {
  if (categories.empty()) {
    std::set<Category> present;
    for (const auto& r : records) present.insert(r.category);
    categories.assign(present.begin(), present.end());
  }
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());

  AggregateTable table;
  table.pooling = pooling;
  for (Category category : categories) {
    CategoryRow row;
    row.category = category;
    bool any = false;
    for (std::size_t ci = 0; ci < kCriteria.size(); ++ci) {
      // evaluator -> (sum, n); ordered so summation order never depends on input order
      std::map<std::string, std::pair<long long, std::size_t>> per_evaluator;
      long long sum = 0;
      std::size_t n = 0;
      for (const auto& r : records) {
        if (r.category != category || r.criterion != kCriteria[ci]) continue;
        sum += r.score;
        ++n;
        auto& e = per_evaluator[r.evaluator];
        e.first += r.score;
        ++e.second;
      }
      row.counts[ci] = n;
      if (n == 0) continue;
      any = true;
      if (pooling == Pooling::Pooled) {
        row.means[ci] = static_cast<double>(sum) / static_cast<double>(n);
      } else {
        double acc = 0.0;
        for (const auto& [evaluator, e] : per_evaluator) acc += static_cast<double>(e.first) / static_cast<double>(e.second);
        row.means[ci] = acc / static_cast<double>(per_evaluator.size());
      }
    }
    if (!any) {
      throw EvalError(EvalErrorKind::EmptyCategory, 0,
                      "no scores for category " + std::string(category_name(category)));
    }
    row.overall = unweighted_mean(row.means);
    table.rows.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Presentation

/// Two decimals, halves rounded up. The small epsilon absorbs binary
/// representation error (4.155 is stored as 4.15499...).
inline std::string format_2dp(double value) {
  const double cents = std::floor(value * 100.0 + 0.5 + 1e-9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", cents / 100.0);
  return buf;
}

inline std::string render_table(const AggregateTable& table) {
  constexpr int kFirst = 18;
  constexpr int kCol = 9;
  std::ostringstream out;
  auto cell = [&](std::string_view text, int width) {
    out << text;
    for (int i = static_cast<int>(text.size()); i < width; ++i) out << ' ';
  };
  cell("Content Category", kFirst);
  for (Criterion c : kCriteria) cell(criterion_short(c), kCol);
  out << "Avg.\n";
  out << std::string(kFirst + kCol * 5 + 4, '-') << '\n';
  for (const auto& row : table.rows) {
    cell(category_name(row.category), kFirst);
    for (const auto& m : row.means) cell(m ? format_2dp(*m) : "-", kCol);
    out << (row.overall ? format_2dp(*row.overall) : "-") << '\n';
  }
  return out.str();
}

inline nlohmann::json table_to_json(const AggregateTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r{{"category", category_name(row.category)}};
    nlohmann::json means = nlohmann::json::object();
    nlohmann::json display = nlohmann::json::object();
    nlohmann::json counts = nlohmann::json::object();
    for (std::size_t i = 0; i < kCriteria.size(); ++i) {
      const auto key = std::string(criterion_name(kCriteria[i]));
      means[key] = row.means[i] ? nlohmann::json(*row.means[i]) : nlohmann::json(nullptr);
      display[key] = row.means[i] ? format_2dp(*row.means[i]) : "-";
      counts[key] = row.counts[i];
    }
    r["means"] = means;
    r["display"] = display;
    r["counts"] = counts;
    r["overall"] = row.overall ? nlohmann::json(*row.overall) : nlohmann::json(nullptr);
    r["overall_display"] = row.overall ? format_2dp(*row.overall) : "-";
    rows.push_back(std::move(r));
  }
  return {{"pooling", table.pooling == Pooling::Pooled ? "pooled" : "nested"}, {"rows", rows}};
}

}  // namespace questforge::evalkit
