#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "questforge/config.hpp"
#include "questforge/json_extract.hpp"
#include "questforge/manifest.hpp"
#include "questforge/prompts.hpp"
#include "questforge/provider.hpp"
#include "questforge/run_state.hpp"
#include "questforge/schema.hpp"
#include "questforge/stage.hpp"
#include "questforge/store.hpp"

namespace questforge {

/// Process exit codes shared by the pipeline and the CLI.
namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kFindings = 1;
inline constexpr int kHalted = 2;
inline constexpr int kSkipped = 3;
inline constexpr int kConfig = 4;
}  // namespace exit_code

struct RunResult {
  RunManifest manifest;
  RunState state;

  int exit_code() const {
    switch (manifest.status) {
      case RunStatus::Completed: return exit_code::kSuccess;
      case RunStatus::CompletedWithSkips: return exit_code::kSkipped;
      case RunStatus::Halted: return exit_code::kHalted;
    }
    return exit_code::kHalted;
  }
};

/// A halting stage failed. The partial manifest has already been persisted.
class HaltedAtStage : public std::runtime_error {
 public:
  HaltedAtStage(StageKind stage, std::string cause, RunResult partial)
      : std::runtime_error("run halted at " + std::string(stage_name(stage)) + ": " + cause),
        stage_(stage), cause_(std::move(cause)), partial_(std::move(partial)) {}
  StageKind stage() const { return stage_; }
  const std::string& cause() const { return cause_; }
  const RunManifest& manifest() const { return partial_.manifest; }
  const RunState& state() const { return partial_.state; }
  const RunResult& partial() const { return partial_; }

 private:
  StageKind stage_;
  std::string cause_;
  RunResult partial_;
};

namespace detail {

// Decodes `doc` as `stage`, appending findings to `report`; installs the typed
// document into `state` only when the report stays valid.
inline bool decode_into(StageKind stage, const nlohmann::json& doc, schema::ValidationReport& report,
                        RunState& state, const std::optional<std::string>& quest_id, std::mutex& state_mutex) {
  bool accepted = false;
  auto finish = [&](auto&& typed, auto&& install) {
    accepted = report.valid();
    if (accepted) {
      std::lock_guard lock(state_mutex);
      install(std::move(typed));
    }
  };
  switch (stage) {
    case StageKind::World:
      finish(schema::decode<StageKind::World>(doc, report), [&](auto&& d) { state.world = std::move(d); });
      break;
    case StageKind::NpcRoster:
      finish(schema::decode<StageKind::NpcRoster>(doc, report), [&](auto&& d) { state.npcs = std::move(d); });
      break;
    case StageKind::Player:
      finish(schema::decode<StageKind::Player>(doc, report), [&](auto&& d) { state.player = std::move(d); });
      break;
    case StageKind::QuestSet:
      finish(schema::decode<StageKind::QuestSet>(doc, report), [&](auto&& d) { state.quests = std::move(d); });
      break;
    case StageKind::ExtendedQuest:
      finish(schema::decode<StageKind::ExtendedQuest>(doc, report),
             [&](auto&& d) { state.extended[quest_id.value_or(d.id)] = std::move(d); });
      break;
  }
  return accepted;
}

}  // namespace detail

/// Runs the five stages for one RunConfig against a provider and a store.
class Pipeline {
 public:
  Pipeline(RunConfig config, provider::Provider& backend, store::RunStore& store,
           prompts::TemplateSet templates = prompts::default_templates())
      : config_(std::move(config)), provider_(backend), store_(store), templates_(std::move(templates)) {}

  const RunConfig& config() const { return config_; }

  /// World -> NpcRoster -> Player -> QuestSet -> ExtendedQuest (one call per
  /// quest). Throws HaltedAtStage when a halting stage fails and ConfigError
  /// for an invalid configuration.
  RunResult run() {
    config_.validate();
    for (StageKind stage : kStageOrder) {
      if (!templates_.contains(stage)) throw ConfigError("no template for " + std::string(stage_name(stage)));
    }
    try {
      store_.create_run(config_.run_id);
    } catch (const store::StoreError& e) {
      if (e.kind() == store::StoreErrorKind::RunExists) throw ConfigError(e.what());
      throw;
    }

    RunResult result;
    result.manifest.run_id = config_.run_id;
    result.manifest.config = config_;
    result.manifest.started_at = format_utc(std::chrono::system_clock::now());

    for (StageKind stage : {StageKind::World, StageKind::NpcRoster, StageKind::Player, StageKind::QuestSet}) {
      auto outcome = execute_stage(stage, result.state);
      const bool accepted = outcome.disposition == Disposition::Accepted;
      result.manifest.outcomes.push_back(std::move(outcome));
      if (!accepted) halt(result, stage);
    }

    auto extended = expand_quests(result.state);
    bool skipped = false;
    for (auto& outcome : extended) {
      skipped = skipped || outcome.disposition == Disposition::SkippedPreservedRaw;
      const bool provider_failed = outcome.disposition == Disposition::HaltedPipeline;
      result.manifest.outcomes.push_back(std::move(outcome));
      if (provider_failed) halt(result, StageKind::ExtendedQuest);
    }
    result.manifest.status = skipped ? RunStatus::CompletedWithSkips : RunStatus::Completed;
    result.manifest.finished_at = format_utc(std::chrono::system_clock::now());
    store_.write_manifest(config_.run_id, result.manifest);
    return result;
  }

  /// One stage invocation with up to `retries_per_stage` re-invocations after
  /// content failures. Every attempt's raw text is persisted before it is
  /// parsed. On acceptance `state` gains the validated artifact.
  StageOutcome execute_stage(StageKind stage, RunState& state, const std::optional<std::string>& quest_id = {}) {
    std::mutex local;
    return execute_stage_locked(stage, state, quest_id, local);
  }

  /// One ExtendedQuest invocation per campaign quest, in quest-set order when
  /// extended_parallelism is 1. Failures become SkippedPreservedRaw; a
  /// provider failure stops further expansion.
  std::vector<StageOutcome> expand_quests(RunState& state) {
    if (!state.quests) throw prompts::MissingDependency(StageKind::ExtendedQuest, StageKind::QuestSet);
    std::vector<std::string> ids;
    for (const auto& q : *state.quests) ids.push_back(q.id);
    std::vector<std::optional<StageOutcome>> slots(ids.size());
    std::mutex state_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
      while (!stop) {
        const auto i = next++;
        if (i >= ids.size()) return;
        try {
          auto outcome = execute_stage_locked(StageKind::ExtendedQuest, state, ids[i], state_mutex);
          if (outcome.provider_failed()) stop = true;
          slots[i] = std::move(outcome);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          stop = true;
        }
      }
    };

    const auto threads = std::min(config_.extended_parallelism, ids.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<StageOutcome> out;
    for (auto& slot : slots) {
      if (slot) out.push_back(std::move(*slot));
    }
    return out;
  }

 private:
  StageOutcome execute_stage_locked(StageKind stage, RunState& state, const std::optional<std::string>& quest_id,
                                    std::mutex& state_mutex) {
    prompts::ContextOptions options;
    options.policy = config_.subset_policy;
    options.user_intent = config_.user_intent;
    options.npc_count = config_.npcs;
    options.quest_count = config_.quests;
    if (stage == StageKind::ExtendedQuest) {
      if (!quest_id) throw std::invalid_argument("extended quest stage needs a target quest id");
      options.target_quest_id = *quest_id;
    }
    prompts::ContextBundle bundle;
    {
      std::lock_guard lock(state_mutex);
      bundle = prompts::build_context(stage, state, options);
    }
    const auto prompt = prompts::render(templates_.at(stage), bundle);

    provider::ChatRequest request;
    request.system_message = prompt.system_message;
    request.user_message = prompt.user_message;
    request.temperature = config_.temperature;
    request.max_output_tokens = config_.max_output_tokens;
    request.model_name = config_.model;
    request.stage_tag = std::string(stage_tag(stage)) + (quest_id ? ":" + *quest_id : "");

    StageOutcome outcome;
    outcome.stage = stage;
    outcome.quest_id = stage == StageKind::ExtendedQuest ? quest_id : std::nullopt;
    const int max_attempts = 1 + config_.retries_per_stage;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
      AttemptRecord record;
      record.attempt = attempt;
      provider::ChatResponse response;
      try {
        response = provider_.complete(request);
      } catch (const provider::ProviderError& e) {
        record.provider_error = e.what();
        outcome.attempts.push_back(std::move(record));
        outcome.disposition = Disposition::HaltedPipeline;
        return outcome;
      }
      record.raw_text = std::move(response.text);
      record.usage = response.usage;
      record.raw = store_.persist_raw(config_.run_id, stage, outcome.quest_id, attempt, record.raw_text);

      auto extraction = extract_json(record.raw_text);
      record.extraction = extraction.error;
      record.extraction_message = extraction.message;
      if (extraction.ok()) {
        schema::ValidationReport report;
        const auto doc = schema::normalize(stage, extraction.value, &report);
        post_checks(stage, doc, quest_id, report);
        const bool accepted = detail::decode_into(stage, doc, report, state, outcome.quest_id, state_mutex);
        record.validation = std::move(report);
        if (accepted) {
          outcome.artifact = store_.persist_structured(config_.run_id, stage, outcome.quest_id, doc);
          outcome.attempts.push_back(std::move(record));
          outcome.disposition = Disposition::Accepted;
          return outcome;
        }
      }
      outcome.attempts.push_back(std::move(record));
    }
    outcome.disposition = is_halting_stage(stage) ? Disposition::HaltedPipeline : Disposition::SkippedPreservedRaw;
    return outcome;
  }

  // Checks that need run configuration: requested counts and id preservation.
  void post_checks(StageKind stage, const nlohmann::json& doc, const std::optional<std::string>& quest_id,
                   schema::ValidationReport& report) const {
    auto count_check = [&](std::size_t requested) {
      if (!doc.is_array() || doc.size() == requested) return;
      report.add(config_.strict_counts ? schema::Severity::Error : schema::Severity::Warning, "",
                 schema::codes::kCountMismatch,
                 "requested " + std::to_string(requested) + " entries, got " + std::to_string(doc.size()));
    };
    if (stage == StageKind::NpcRoster) count_check(config_.npcs);
    if (stage == StageKind::QuestSet) count_check(config_.quests);
    if (stage == StageKind::ExtendedQuest && quest_id && doc.is_object()) {
      const auto id = doc.find("id");
      if (id != doc.end() && id->is_string() && id->get<std::string>() != *quest_id) {
        report.add(schema::Severity::Error, "id", schema::codes::kIdMismatch,
                   "extended quest id '" + id->get<std::string>() + "' does not match source quest '" + *quest_id +
                       "'");
      }
    }
  }

  [[noreturn]] void halt(RunResult& result, StageKind stage) {
    const auto& last = result.manifest.outcomes.back();
    std::string cause;
    if (last.provider_failed()) {
      cause = *last.attempts.back().provider_error;
    } else if (!last.attempts.empty() && last.attempts.back().extraction != ExtractError::None) {
      cause = std::string(extract_error_name(last.attempts.back().extraction)) + ": " +
              last.attempts.back().extraction_message;
    } else {
      cause = "validation failed";
      if (const auto& v = last.validation()) {
        for (const auto& f : v->findings) {
          if (f.severity == schema::Severity::Error) {
            cause += ": " + f.code + " at '" + f.path + "'";
            break;
          }
        }
      }
    }
    result.manifest.status = RunStatus::Halted;
    result.manifest.halted_at = stage;
    result.manifest.halt_cause = cause;
    result.manifest.finished_at = format_utc(std::chrono::system_clock::now());
    store_.write_manifest(config_.run_id, result.manifest);
    throw HaltedAtStage(stage, cause, result);
  }

  RunConfig config_;
  provider::Provider& provider_;
  store::RunStore& store_;
  prompts::TemplateSet templates_;
};

inline RunResult execute_run(const RunConfig& config, provider::Provider& backend, store::RunStore& store,
                             prompts::TemplateSet templates = prompts::default_templates()) {
  return Pipeline(config, backend, store, std::move(templates)).run();
}

}  // namespace questforge
