#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "questforge/config.hpp"
#include "questforge/json_extract.hpp"
#include "questforge/schema.hpp"
#include "questforge/stage.hpp"

namespace questforge {

/// One file written by the store.
struct ArtifactRecord {
  StageKind stage = StageKind::World;
  std::optional<std::string> quest_id;
  std::optional<int> attempt;  // raw records only
  std::string path;            // relative to the run directory
  std::string sha256;
  std::string written_at;
  std::uint64_t sequence = 0;  // store-wide write order

  bool operator==(const ArtifactRecord&) const = default;
};

enum class Disposition { Accepted, HaltedPipeline, SkippedPreservedRaw };

constexpr std::string_view disposition_name(Disposition d) {
  switch (d) {
    case Disposition::Accepted: return "Accepted";
    case Disposition::HaltedPipeline: return "HaltedPipeline";
    case Disposition::SkippedPreservedRaw: return "SkippedPreservedRaw";
  }
  return "Unknown";
}

inline std::optional<Disposition> parse_disposition(std::string_view s) {
  for (auto d : {Disposition::Accepted, Disposition::HaltedPipeline, Disposition::SkippedPreservedRaw}) {
    if (s == disposition_name(d)) return d;
  }
  return std::nullopt;
}

/// One provider invocation inside a stage.
struct AttemptRecord {
  int attempt = 1;
  /// Verbatim model text. Kept in memory only; the manifest references the raw file.
  std::string raw_text;
  std::optional<ArtifactRecord> raw;
  ExtractError extraction = ExtractError::None;
  std::string extraction_message;
  std::optional<schema::ValidationReport> validation;
  /// Set when the provider failed and no text arrived.
  std::optional<std::string> provider_error;
  std::optional<provider::TokenUsage> usage;

  bool content_ok() const {
    return !provider_error && extraction == ExtractError::None && validation && validation->valid();
  }
};

struct StageOutcome {
  StageKind stage = StageKind::World;
  std::optional<std::string> quest_id;
  std::vector<AttemptRecord> attempts;
  Disposition disposition = Disposition::HaltedPipeline;
  std::optional<ArtifactRecord> artifact;

  int attempt_count() const { return static_cast<int>(attempts.size()); }
  const std::string& raw_text() const {
    static const std::string empty;
    return attempts.empty() ? empty : attempts.back().raw_text;
  }
  const std::optional<schema::ValidationReport>& validation() const {
    static const std::optional<schema::ValidationReport> none;
    return attempts.empty() ? none : attempts.back().validation;
  }
  bool provider_failed() const { return !attempts.empty() && attempts.back().provider_error.has_value(); }
};

enum class RunStatus { Completed, CompletedWithSkips, Halted };

constexpr std::string_view run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::CompletedWithSkips: return "completed_with_skips";
    case RunStatus::Halted: return "halted";
  }
  return "unknown";
}

struct RunManifest {
  std::string run_id;
  nlohmann::json config = nlohmann::json::object();
  std::vector<StageOutcome> outcomes;
  std::string started_at;
  std::string finished_at;
  RunStatus status = RunStatus::Completed;
  std::optional<StageKind> halted_at;
  std::string halt_cause;

  std::size_t total_invocations() const {
    std::size_t n = 0;
    for (const auto& o : outcomes) n += o.attempts.size();
    return n;
  }
  std::size_t count(Disposition d) const {
    std::size_t n = 0;
    for (const auto& o : outcomes) n += o.disposition == d ? 1 : 0;
    return n;
  }
  std::vector<std::string> artifact_paths() const {
    std::vector<std::string> out;
    for (const auto& o : outcomes) {
      if (o.artifact) out.push_back(o.artifact->path);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ArtifactRecord& r) {
  j = nlohmann::json{{"stage", stage_tag(r.stage)}, {"path", r.path},         {"sha256", r.sha256},
                     {"written_at", r.written_at},  {"sequence", r.sequence}};
  if (r.quest_id) j["quest_id"] = *r.quest_id;
  if (r.attempt) j["attempt"] = *r.attempt;
}

inline void from_json(const nlohmann::json& j, ArtifactRecord& r) {
  r.stage = parse_stage(j.at("stage").get<std::string>()).value();
  r.path = j.at("path").get<std::string>();
  r.sha256 = j.at("sha256").get<std::string>();
  r.written_at = j.at("written_at").get<std::string>();
  r.sequence = j.at("sequence").get<std::uint64_t>();
  r.quest_id = j.contains("quest_id") ? std::optional(j["quest_id"].get<std::string>()) : std::nullopt;
  r.attempt = j.contains("attempt") ? std::optional(j["attempt"].get<int>()) : std::nullopt;
}

inline void to_json(nlohmann::json& j, const AttemptRecord& a) {
  j = nlohmann::json{{"attempt", a.attempt},
                     {"extraction", {{"error", extract_error_name(a.extraction)}, {"message", a.extraction_message}}}};
  if (a.raw) j["raw"] = *a.raw;
  if (a.validation) j["validation"] = *a.validation;
  if (a.provider_error) j["provider_error"] = *a.provider_error;
  if (a.usage) j["usage"] = {{"prompt_tokens", a.usage->prompt_tokens}, {"completion_tokens", a.usage->completion_tokens}};
}

inline void from_json(const nlohmann::json& j, AttemptRecord& a) {
  a.attempt = j.at("attempt").get<int>();
  const auto err = j.at("extraction").at("error").get<std::string>();
  a.extraction = ExtractError::None;
  for (auto e : {ExtractError::NoJsonFound, ExtractError::UnbalancedJson, ExtractError::InvalidJson}) {
    if (err == extract_error_name(e)) a.extraction = e;
  }
  a.extraction_message = j.at("extraction").at("message").get<std::string>();
  if (j.contains("raw")) a.raw = j["raw"].get<ArtifactRecord>();
  if (j.contains("validation")) a.validation = schema::report_from_json(j["validation"]);
  if (j.contains("provider_error")) a.provider_error = j["provider_error"].get<std::string>();
  if (j.contains("usage")) {
    a.usage = provider::TokenUsage{j["usage"].at("prompt_tokens").get<std::int64_t>(),
                                   j["usage"].at("completion_tokens").get<std::int64_t>()};
  }
}

inline void to_json(nlohmann::json& j, const StageOutcome& o) {
  j = nlohmann::json{{"stage", stage_tag(o.stage)},
                     {"attempt_count", o.attempt_count()},
                     {"attempts", o.attempts},
                     {"disposition", disposition_name(o.disposition)}};
  if (o.quest_id) j["quest_id"] = *o.quest_id;
  if (o.artifact) j["artifact"] = *o.artifact;
}

inline void from_json(const nlohmann::json& j, StageOutcome& o) {
  o.stage = parse_stage(j.at("stage").get<std::string>()).value();
  o.attempts = j.at("attempts").get<std::vector<AttemptRecord>>();
  o.disposition = parse_disposition(j.at("disposition").get<std::string>()).value();
  o.quest_id = j.contains("quest_id") ? std::optional(j["quest_id"].get<std::string>()) : std::nullopt;
  if (j.contains("artifact")) o.artifact = j["artifact"].get<ArtifactRecord>();
}

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"run_id", m.run_id},
                     {"config", m.config},
                     {"outcomes", m.outcomes},
                     {"artifacts", m.artifact_paths()},
                     {"started_at", m.started_at},
                     {"finished_at", m.finished_at},
                     {"status", run_status_name(m.status)},
                     {"total_invocations", m.total_invocations()}};
  if (m.halted_at) {
    j["halted_at"] = stage_tag(*m.halted_at);
    j["halt_cause"] = m.halt_cause;
  }
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  m.run_id = j.at("run_id").get<std::string>();
  m.config = j.at("config");
  m.outcomes = j.at("outcomes").get<std::vector<StageOutcome>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  const auto status = j.at("status").get<std::string>();
  m.status = status == "halted"                 ? RunStatus::Halted
             : status == "completed_with_skips" ? RunStatus::CompletedWithSkips
                                                : RunStatus::Completed;
  if (j.contains("halted_at")) {
    m.halted_at = parse_stage(j["halted_at"].get<std::string>());
    m.halt_cause = j.value("halt_cause", "");
  }
}

/// Manifest JSON with run id, timestamps and store sequence numbers removed,
/// for comparing replays of the same script.
inline nlohmann::json manifest_fingerprint(const RunManifest& m) {
  nlohmann::json j = m;
  j.erase("run_id");
  j.erase("started_at");
  j.erase("finished_at");
  j["config"].erase("run_id");
  for (auto& outcome : j["outcomes"]) {
    if (outcome.contains("artifact")) {
      outcome["artifact"].erase("written_at");
      outcome["artifact"].erase("sequence");
    }
    for (auto& attempt : outcome["attempts"]) {
      if (attempt.contains("raw")) {
        attempt["raw"].erase("written_at");
        attempt["raw"].erase("sequence");
      }
    }
  }
  return j;
}

}  // namespace questforge
