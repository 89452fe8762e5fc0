#pragma once

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>
#include <nlohmann/json.hpp>

#include "questforge/manifest.hpp"
#include "questforge/run_state.hpp"
#include "questforge/schema.hpp"
#include "questforge/stage.hpp"

namespace questforge::store {

namespace fs = std::filesystem;

enum class StoreErrorKind { Io, DuplicateAttempt, AlreadyPersisted, NotFound, CorruptArtifact, InvalidKey, RunExists };

constexpr std::string_view store_error_name(StoreErrorKind k) {
  switch (k) {
    case StoreErrorKind::Io: return "IoError";
    case StoreErrorKind::DuplicateAttempt: return "DuplicateAttempt";
    case StoreErrorKind::AlreadyPersisted: return "AlreadyPersisted";
    case StoreErrorKind::NotFound: return "NotFound";
    case StoreErrorKind::CorruptArtifact: return "CorruptArtifact";
    case StoreErrorKind::InvalidKey: return "InvalidKey";
    case StoreErrorKind::RunExists: return "RunExists";
  }
  return "StoreError";
}

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrorKind kind, const std::string& what, std::string path = {},
             std::optional<schema::ValidationReport> report = std::nullopt)
      : std::runtime_error(std::string(store_error_name(kind)) + ": " + what),
        kind_(kind), path_(std::move(path)), report_(std::move(report)) {}
  StoreErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }
  const std::optional<schema::ValidationReport>& report() const { return report_; }

 private:
  StoreErrorKind kind_;
  std::string path_;
  std::optional<schema::ValidationReport> report_;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw StoreError(StoreErrorKind::Io, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreErrorKind::NotFound, "cannot read " + path.string(), path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// File stem for a (stage, quest id) key: "world", "extended_M3", ...
inline std::string artifact_stem(StageKind stage, const std::optional<std::string>& quest_id) {
  std::string stem(stage_tag(stage));
  if (quest_id) stem += "_" + *quest_id;
  return stem;
}

inline std::string raw_relpath(StageKind stage, const std::optional<std::string>& quest_id, int attempt) {
  return "raw/" + artifact_stem(stage, quest_id) + "_attempt" + std::to_string(attempt) + ".txt";
}

inline std::string structured_relpath(StageKind stage, const std::optional<std::string>& quest_id) {
  return "artifacts/" + artifact_stem(stage, quest_id) + ".json";
}

struct LoadedRun {
  RunState state;
  RunManifest manifest;
};

/// Filesystem run store rooted at `<base>/runs`. Files are created exclusively
/// and never rewritten.
///
///   runs/<run_id>/raw/<stage>[_<qid>]_attempt<N>.txt
///   runs/<run_id>/artifacts/<stage>[_<qid>].json
///   runs/<run_id>/manifest.json
class RunStore {
 public:
  explicit RunStore(fs::path base) : runs_(std::move(base) / "runs") {}

  const fs::path& runs_root() const { return runs_; }
  fs::path run_dir(const std::string& run_id) const { return runs_ / run_id; }
  bool exists(const std::string& run_id) const { return fs::is_directory(run_dir(run_id)); }

  void create_run(const std::string& run_id) {
    check_key(run_id, "run id");
    std::error_code ec;
    fs::create_directories(runs_, ec);
    if (ec) throw StoreError(StoreErrorKind::Io, "cannot create " + runs_.string() + ": " + ec.message());
    if (!fs::create_directory(run_dir(run_id), ec)) {
      if (ec) throw StoreError(StoreErrorKind::Io, "cannot create run directory: " + ec.message());
      throw StoreError(StoreErrorKind::RunExists, "run '" + run_id + "' already exists", run_dir(run_id).string());
    }
    for (const char* sub : {"raw", "artifacts"}) {
      fs::create_directory(run_dir(run_id) / sub, ec);
      if (ec) throw StoreError(StoreErrorKind::Io, "cannot create " + std::string(sub) + ": " + ec.message());
    }
  }

  std::vector<std::string> list_runs() const {
    std::vector<std::string> out;
    if (!fs::is_directory(runs_)) return out;
    for (const auto& entry : fs::directory_iterator(runs_)) {
      if (entry.is_directory()) out.push_back(entry.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  ArtifactRecord persist_raw(const std::string& run_id, StageKind stage, const std::optional<std::string>& quest_id,
                             int attempt, std::string_view text) {
    if (attempt < 1) throw StoreError(StoreErrorKind::InvalidKey, "attempt numbers start at 1");
    if (quest_id) check_key(*quest_id, "quest id");
    ArtifactRecord record;
    record.stage = stage;
    record.quest_id = quest_id;
    record.attempt = attempt;
    record.path = raw_relpath(stage, quest_id, attempt);
    write_exclusive(run_id, record, text, StoreErrorKind::DuplicateAttempt);
    return record;
  }

  /// Writes the canonical serialization of a schema-valid document.
  ArtifactRecord persist_structured(const std::string& run_id, StageKind stage,
                                    const std::optional<std::string>& quest_id, const nlohmann::json& doc) {
    if (quest_id) check_key(*quest_id, "quest id");
    auto report = schema::validate(stage, doc);
    if (!report.valid()) {
      throw StoreError(StoreErrorKind::CorruptArtifact, "refusing to persist an invalid " +
                                                            std::string(stage_name(stage)) + " document",
                       structured_relpath(stage, quest_id), std::move(report));
    }
    ArtifactRecord record;
    record.stage = stage;
    record.quest_id = quest_id;
    record.path = structured_relpath(stage, quest_id);
    write_exclusive(run_id, record, schema::canonical_serialize(doc), StoreErrorKind::AlreadyPersisted);
    return record;
  }

  void write_manifest(const std::string& run_id, const RunManifest& manifest) {
    ArtifactRecord record;
    record.path = "manifest.json";
    write_exclusive(run_id, record, nlohmann::json(manifest).dump(2), StoreErrorKind::AlreadyPersisted);
  }

  RunManifest read_manifest(const std::string& run_id) const {
    if (!exists(run_id)) throw StoreError(StoreErrorKind::NotFound, "no run '" + run_id + "'", run_dir(run_id).string());
    const auto path = run_dir(run_id) / "manifest.json";
    if (!fs::exists(path)) throw StoreError(StoreErrorKind::CorruptArtifact, "run has no manifest", path.string());
    try {
      return nlohmann::json::parse(read_file(path)).get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
      throw StoreError(StoreErrorKind::CorruptArtifact, std::string("unreadable manifest: ") + e.what(), path.string());
    }
  }

  /// Loads every structured artifact, checking it against the hash recorded in
  /// the manifest and re-validating it.
  LoadedRun load_run(const std::string& run_id) const {
    LoadedRun out;
    out.manifest = read_manifest(run_id);
    std::map<std::string, ArtifactRecord> recorded;
    for (const auto& o : out.manifest.outcomes) {
      if (o.artifact) recorded[o.artifact->path] = *o.artifact;
    }
    const auto dir = run_dir(run_id);
    const auto artifacts_dir = dir / "artifacts";
    std::vector<std::string> files;
    if (fs::is_directory(artifacts_dir)) {
      for (const auto& entry : fs::directory_iterator(artifacts_dir)) {
        files.push_back("artifacts/" + entry.path().filename().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& rel : files) {
      auto it = recorded.find(rel);
      if (it == recorded.end()) {
        throw StoreError(StoreErrorKind::CorruptArtifact, "artifact not recorded in manifest", rel);
      }
      const auto bytes = read_file(dir / rel);
      if (sha256_hex(bytes) != it->second.sha256) {
        throw StoreError(StoreErrorKind::CorruptArtifact, "content hash mismatch for " + rel, rel);
      }
      nlohmann::json doc = nlohmann::json::parse(bytes, nullptr, false);
      if (doc.is_discarded()) throw StoreError(StoreErrorKind::CorruptArtifact, rel + " is not JSON", rel);
      install(out.state, it->second, doc, rel);
      recorded.erase(it);
    }
    if (!recorded.empty()) {
      throw StoreError(StoreErrorKind::CorruptArtifact, "manifest lists a missing artifact", recorded.begin()->first);
    }
    if (!out.state.ordered()) {
      throw StoreError(StoreErrorKind::CorruptArtifact, "artifacts do not follow stage order", artifacts_dir.string());
    }
    for (auto& o : out.manifest.outcomes) {
      for (auto& a : o.attempts) {
        if (a.raw) a.raw_text = read_file(dir / a.raw->path);
      }
    }
    return out;
  }

  /// Layout checks: every artifact has raw text for the same key, and every
  /// recorded hash matches its file. Returns human-readable violations.
  std::vector<std::string> audit_run(const std::string& run_id) const {
    std::vector<std::string> problems;
    const auto dir = run_dir(run_id);
    auto keys_in = [&](const char* sub, bool raw) {
      std::set<std::string> keys;
      if (!fs::is_directory(dir / sub)) return keys;
      for (const auto& entry : fs::directory_iterator(dir / sub)) {
        auto stem = entry.path().stem().string();
        if (raw) stem = stem.substr(0, stem.rfind("_attempt"));
        keys.insert(stem);
      }
      return keys;
    };
    const auto raw_keys = keys_in("raw", true);
    for (const auto& key : keys_in("artifacts", false)) {
      if (!raw_keys.count(key)) problems.push_back("artifact '" + key + "' has no raw text");
    }
    if (fs::exists(dir / "manifest.json")) {
      const auto manifest = read_manifest(run_id);
      auto check = [&](const ArtifactRecord& r) {
        if (!fs::exists(dir / r.path)) {
          problems.push_back("missing file " + r.path);
        } else if (sha256_hex(read_file(dir / r.path)) != r.sha256) {
          problems.push_back("hash mismatch for " + r.path);
        }
      };
      for (const auto& o : manifest.outcomes) {
        for (const auto& a : o.attempts) {
          if (a.raw) check(*a.raw);
        }
        if (o.artifact) check(*o.artifact);
      }
    }
    return problems;
  }

 private:
  static void check_key(const std::string& key, const char* what) {
    const bool ok = !key.empty() && key != "." && key != ".." &&
                    key.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.") ==
                        std::string::npos;
    if (!ok) throw StoreError(StoreErrorKind::InvalidKey, std::string(what) + " '" + key + "' is not a safe file name");
  }

  void write_exclusive(const std::string& run_id, ArtifactRecord& record, std::string_view bytes,
                       StoreErrorKind exists_kind) {
    if (!exists(run_id)) {
      throw StoreError(StoreErrorKind::NotFound, "run '" + run_id + "' is not initialized", run_dir(run_id).string());
    }
    const auto path = run_dir(run_id) / record.path;
    // "x" makes creation fail if the file exists, so concurrent writers to one key cannot both succeed
    std::FILE* f = std::fopen(path.c_str(), "wbx");
    if (!f) {
      if (errno == EEXIST) throw StoreError(exists_kind, record.path + " already exists", record.path);
      throw StoreError(StoreErrorKind::Io, "cannot create " + path.string() + ": " + std::strerror(errno), record.path);
    }
    const bool wrote = bytes.empty() || std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    const bool closed = std::fclose(f) == 0;
    if (!wrote || !closed) throw StoreError(StoreErrorKind::Io, "short write to " + path.string(), record.path);
    record.sha256 = sha256_hex(bytes);
    record.sequence = ++sequence_;
    record.written_at = format_utc(std::chrono::system_clock::now());
  }

  static void install(RunState& state, const ArtifactRecord& record, const nlohmann::json& doc, const std::string& rel) {
    schema::ValidationReport report;
    auto fail = [&] {
      throw StoreError(StoreErrorKind::CorruptArtifact, rel + " no longer validates", rel, report);
    };
    switch (record.stage) {
      case StageKind::World: state.world = schema::decode<StageKind::World>(doc, report); break;
      case StageKind::NpcRoster: state.npcs = schema::decode<StageKind::NpcRoster>(doc, report); break;
      case StageKind::Player: state.player = schema::decode<StageKind::Player>(doc, report); break;
      case StageKind::QuestSet: state.quests = schema::decode<StageKind::QuestSet>(doc, report); break;
      case StageKind::ExtendedQuest: {
        auto quest = schema::decode<StageKind::ExtendedQuest>(doc, report);
        if (!record.quest_id) fail();
        state.extended[*record.quest_id] = std::move(quest);
        break;
      }
    }
    if (!report.valid()) fail();
  }

  fs::path runs_;
  std::atomic<std::uint64_t> sequence_{0};
};

}  // namespace questforge::store
