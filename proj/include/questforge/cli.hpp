#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "questforge/config.hpp"
#include "questforge/consistency.hpp"
#include "questforge/evalkit.hpp"
#include "questforge/http_provider.hpp"
#include "questforge/pipeline.hpp"
#include "questforge/prompts.hpp"
#include "questforge/provider.hpp"
#include "questforge/store.hpp"

namespace questforge::cli {

/// Flag values before they are resolved into a RunConfig.
struct Options {
  std::vector<std::string> fixtures;
  std::string model{provider::kDefaultModel};
  double temperature = provider::kDefaultTemperature;
  std::int64_t max_tokens = provider::kDefaultMaxOutputTokens;
  std::size_t npcs = 10;
  std::size_t quests = 10;
  int retries = 1;
  std::size_t runs = 20;
  std::string out_dir = ".";
  std::string intent;
  bool strict_counts = false;
  std::size_t parallel_runs = 1;
  std::size_t parallel_quests = 1;
  std::string templates_dir;
  std::string endpoint{provider::kDefaultEndpoint};
  std::string subset = "all";
  std::string api_key;

  // per-subcommand
  std::string run_id;
  std::string scores;
  std::string pooling = "pooled";
  std::string out_file;
  bool json = false;
};

/// Tallies for one finished (or halted) run.
struct RunSummary {
  std::string run_id;
  RunStatus status = RunStatus::Completed;
  std::size_t worlds = 0, npcs = 0, players = 0, quests = 0, extended = 0, skipped = 0, invocations = 0;
  std::optional<StageKind> halted_at;
  std::string error;

  static RunSummary of(const RunManifest& m, const RunState& s) {
    RunSummary r;
    r.run_id = m.run_id;
    r.status = m.status;
    r.worlds = s.world ? 1 : 0;
    r.npcs = s.npcs ? s.npcs->size() : 0;
    r.players = s.player ? 1 : 0;
    r.quests = s.quests ? s.quests->size() : 0;
    r.extended = s.extended.size();
    r.skipped = m.count(Disposition::SkippedPreservedRaw);
    r.invocations = m.total_invocations();
    r.halted_at = m.halted_at;
    return r;
  }

  int exit_code() const {
    switch (status) {
      case RunStatus::Completed: return exit_code::kSuccess;
      case RunStatus::CompletedWithSkips: return exit_code::kSkipped;
      case RunStatus::Halted: return exit_code::kHalted;
    }
    return exit_code::kHalted;
  }
};

inline void print_summary(std::ostream& out, const RunSummary& s) {
  out << "run_id: " << s.run_id << "\n";
  out << "status: " << run_status_name(s.status);
  if (s.halted_at) out << " at " << stage_name(*s.halted_at);
  out << "\n";
  out << "artifacts: world " << s.worlds << ", npcs " << s.npcs << ", player " << s.players << ", quests "
      << s.quests << ", extended " << s.extended << " (skipped " << s.skipped << ")\n";
  out << "invocations: " << s.invocations << "\n";
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline RunConfig resolve_config(const Options& o) {
  RunConfig c;
  c.npcs = o.npcs;
  c.quests = o.quests;
  c.temperature = o.temperature;
  c.max_output_tokens = o.max_tokens;
  c.model = o.model;
  try {
    c.subset_policy = prompts::parse_subset_policy(o.subset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.user_intent = o.intent;
  c.extended_parallelism = o.parallel_quests;
  c.retries_per_stage = o.retries;
  c.strict_counts = o.strict_counts;
  return c;
}

inline prompts::TemplateSet resolve_templates(const Options& o) {
  if (o.templates_dir.empty()) return prompts::default_templates();
  try {
    return prompts::load_templates(o.templates_dir);
  } catch (const prompts::TemplateError& e) {
    throw ConfigError(e.what());
  }
}

/// Makes one provider per run: a fresh script from the fixture list, or the
/// shared HTTP client.
class ProviderFactory {
 public:
  explicit ProviderFactory(const Options& o) {
    if (!o.fixtures.empty()) {
      // a script replays in call order, which parallel expansion does not fix
      if (o.parallel_quests > 1) throw UsageError("--parallel-quests cannot be combined with --fixture");
      for (const auto& f : o.fixtures) {
        try {
          scripts_.push_back(provider::load_fixture(f));
        } catch (const std::exception& e) {
          throw ConfigError("fixture " + f + ": " + e.what());
        }
      }
      return;
    }
    if (o.api_key.empty()) {
      throw ConfigError("no provider configured: pass --fixture or set " + std::string(provider::kApiKeyEnv));
    }
    provider::HttpConfig http;
    http.endpoint = o.endpoint;
    http.api_key = o.api_key;
    try {
      http_ = std::make_shared<provider::HttpProvider>(http);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  std::shared_ptr<provider::Provider> make(std::size_t run_index) const {
    if (http_) return http_;
    auto scripted = std::make_shared<provider::ScriptedProvider>(scripts_[run_index % scripts_.size()]);
    // serialized in case one script is shared across threads
    return std::make_shared<OwningSerialized>(std::move(scripted));
  }

 private:
  class OwningSerialized : public provider::Provider {
   public:
    explicit OwningSerialized(std::shared_ptr<provider::Provider> inner) : inner_(std::move(inner)), guard_(*inner_) {}
    provider::ChatResponse complete(const provider::ChatRequest& r) override { return guard_.complete(r); }

   private:
    std::shared_ptr<provider::Provider> inner_;
    provider::SerializedProvider guard_;
  };

  std::vector<provider::FixtureScript> scripts_;
  std::shared_ptr<provider::HttpProvider> http_;
};

/// Runs one pipeline, turning a halt into a summary instead of an exception.
inline RunSummary run_one(RunConfig config, provider::Provider& backend, store::RunStore& store,
                          const prompts::TemplateSet& templates) {
  try {
    auto result = execute_run(config, backend, store, templates);
    return RunSummary::of(result.manifest, result.state);
  } catch (const HaltedAtStage& h) {
    auto s = RunSummary::of(h.manifest(), h.state());
    s.error = h.what();
    return s;
  }
}

/// Fresh run ids that collide neither with the store nor with each other.
class RunIdSource {
 public:
  explicit RunIdSource(const store::RunStore& store) : store_(store) {}
  std::string next() {
    std::lock_guard lock(mutex_);
    for (;;) {
      auto id = make_run_id();
      if (!store_.exists(id) && issued_.insert(id).second) return id;
    }
  }

 private:
  const store::RunStore& store_;
  std::mutex mutex_;
  std::set<std::string> issued_;
};

inline int cmd_generate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.fixtures.size() > 1) throw UsageError("generate takes at most one --fixture");
  auto config = resolve_config(o);
  auto templates = resolve_templates(o);
  ProviderFactory factory(o);
  store::RunStore store(o.out_dir);
  config.run_id = o.run_id.empty() ? RunIdSource(store).next() : o.run_id;
  config.validate();
  auto backend = factory.make(0);
  auto summary = run_one(config, *backend, store, templates);
  print_summary(out, summary);
  if (!summary.error.empty()) err << summary.error << "\n";
  return summary.exit_code();
}

inline int cmd_batch(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.runs == 0) throw UsageError("--runs must be at least 1");
  if (o.parallel_runs == 0) throw UsageError("--parallel-runs must be at least 1");
  auto base = resolve_config(o);
  base.run_id = "placeholder";
  base.validate();
  auto templates = resolve_templates(o);
  ProviderFactory factory(o);
  store::RunStore store(o.out_dir);
  RunIdSource ids(store);

  std::vector<RunSummary> summaries(o.runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < o.runs; i = next++) {
      auto config = base;
      config.run_id = ids.next();
      try {
        auto backend = factory.make(i);
        summaries[i] = run_one(config, *backend, store, templates);
      } catch (const std::exception& e) {
        summaries[i].run_id = config.run_id;
        summaries[i].status = RunStatus::Halted;
        summaries[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(o.parallel_runs, o.runs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  RunSummary total;
  std::size_t completed = 0, with_skips = 0, halted = 0;
  for (const auto& s : summaries) {
    out << s.run_id << "  " << run_status_name(s.status) << "  invocations " << s.invocations << "\n";
    if (!s.error.empty()) err << s.run_id << ": " << s.error << "\n";
    total.worlds += s.worlds;
    total.npcs += s.npcs;
    total.players += s.players;
    total.quests += s.quests;
    total.extended += s.extended;
    total.skipped += s.skipped;
    total.invocations += s.invocations;
    completed += s.status == RunStatus::Completed;
    with_skips += s.status == RunStatus::CompletedWithSkips;
    halted += s.status == RunStatus::Halted;
  }
  out << "runs: " << o.runs << " (completed " << completed << ", with skips " << with_skips << ", halted " << halted
      << ")\n";
  out << "totals: worlds " << total.worlds << ", npcs " << total.npcs << ", players " << total.players
      << ", quests " << total.quests << ", extended " << total.extended << ", skipped " << total.skipped << "\n";
  out << "invocations: " << total.invocations << "\n";
  if (halted) return exit_code::kHalted;
  if (with_skips) return exit_code::kSkipped;
  return exit_code::kSuccess;
}

inline int cmd_lint(const Options& o, std::ostream& out, std::ostream&) {
  store::RunStore store(o.out_dir);
  if (!store.exists(o.run_id)) throw ConfigError("no run '" + o.run_id + "' under " + store.runs_root().string());
  auto loaded = store.load_run(o.run_id);
  if (!loaded.state.world) throw ConfigError("run '" + o.run_id + "' has no world artifact to lint");
  consistency::LintOptions opts;
  if (loaded.manifest.config.contains("npcs")) opts.expected_npcs = loaded.manifest.config["npcs"].get<std::size_t>();
  if (loaded.manifest.config.contains("quests")) {
    opts.expected_quests = loaded.manifest.config["quests"].get<std::size_t>();
  }
  const auto findings = consistency::lint_run(loaded.state, opts);
  const auto errors = consistency::count_severity(findings, schema::Severity::Error);
  if (o.json) {
    out << nlohmann::json{{"run_id", o.run_id}, {"findings", findings}, {"errors", errors}}.dump(2) << "\n";
  } else {
    for (const auto& f : findings) {
      out << schema::severity_name(f.severity) << "  " << f.code << "  " << f.artifact;
      if (!f.path.empty()) out << ":" << f.path;
      out << "  " << f.message << "\n";
    }
    out << findings.size() << " findings, " << errors << " errors\n";
  }
  return errors ? exit_code::kFindings : exit_code::kSuccess;
}

inline int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  evalkit::Pooling pooling;
  if (o.pooling == "pooled") {
    pooling = evalkit::Pooling::Pooled;
  } else if (o.pooling == "nested") {
    pooling = evalkit::Pooling::Nested;
  } else {
    throw UsageError("--pooling must be pooled or nested");
  }
  auto table = evalkit::aggregate(evalkit::ingest_scores(o.scores), pooling);
  const auto text = o.json ? evalkit::table_to_json(table).dump(2) + "\n" : evalkit::render_table(table);
  if (!o.out_file.empty()) {
    std::ofstream f(o.out_file, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + o.out_file);
    f << text;
  }
  out << text;
  return exit_code::kSuccess;
}

inline int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  store::RunStore store(o.out_dir);
  if (!store.exists(o.run_id)) throw ConfigError("no run '" + o.run_id + "' under " + store.runs_root().string());
  const auto m = store.read_manifest(o.run_id);
  if (o.json) {
    out << nlohmann::json(m).dump(2) << "\n";
    return exit_code::kSuccess;
  }
  out << "run_id: " << m.run_id << "\n";
  out << "status: " << run_status_name(m.status);
  if (m.halted_at) out << " at " << stage_name(*m.halted_at) << " (" << m.halt_cause << ")";
  out << "\n";
  out << "started: " << m.started_at << "\nfinished: " << m.finished_at << "\n";
  out << "invocations: " << m.total_invocations() << "\n";
  for (const auto& oc : m.outcomes) {
    out << "  " << stage_tag(oc.stage);
    if (oc.quest_id) out << ":" << *oc.quest_id;
    out << "  " << disposition_name(oc.disposition) << "  attempts " << oc.attempts.size();
    if (oc.artifact) out << "  " << oc.artifact->path << "  sha256 " << oc.artifact->sha256.substr(0, 12);
    out << "\n";
    for (const auto& a : oc.attempts) {
      out << "    attempt " << a.attempt << "  " << (a.raw ? a.raw->path : std::string("(no raw text)"));
      if (a.provider_error) out << "  provider error: " << *a.provider_error;
      if (a.extraction != ExtractError::None) out << "  " << extract_error_name(a.extraction);
      if (a.validation && !a.validation->valid()) {
        out << "  " << a.validation->count(schema::Severity::Error) << " validation errors";
      }
      out << "\n";
    }
  }
  return exit_code::kSuccess;
}

inline void add_run_flags(CLI::App& app, Options& o) {
  app.add_option("--fixture", o.fixtures, "Scripted response file (repeatable; batch cycles through them)");
  app.add_option("--model", o.model, "Model name")->capture_default_str();
  app.add_option("--temperature", o.temperature, "Sampling temperature")->capture_default_str();
  app.add_option("--max-tokens", o.max_tokens, "Output token budget per call")->capture_default_str();
  app.add_option("--npcs", o.npcs, "NPCs requested per run")->capture_default_str();
  app.add_option("--quests", o.quests, "Campaign quests requested per run")->capture_default_str();
  app.add_option("--retries", o.retries, "Re-invocations per stage after a malformed response")->capture_default_str();
  app.add_option("--intent", o.intent, "Optional user intent for the world stage");
  app.add_flag("--strict-counts", o.strict_counts, "Treat count mismatches as errors");
  app.add_option("--templates", o.templates_dir, "Directory of <stage>/{system,user}.txt templates");
  app.add_option("--endpoint", o.endpoint, "Chat-completions base URL")->capture_default_str();
  app.add_option("--subset", o.subset, "NPC subset for the player stage: all, first:K, named:a,b")
      ->capture_default_str();
  app.add_option("--parallel-quests", o.parallel_quests, "Concurrent extended-quest calls")->capture_default_str();
  app.add_option("--api-key", o.api_key, "API credential")->envname(std::string(provider::kApiKeyEnv));
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"questforge: staged RPG content generation"};
  app.set_config("--config", "", "Key = value configuration file");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--out-dir", o.out_dir, "Directory holding runs/")->capture_default_str();
  // run flags live on the top-level app so a config file can set them without sections
  detail::add_run_flags(app, o);
  app.fallthrough();

  auto* generate = app.add_subcommand("generate", "Execute one run");
  generate->add_option("--run-id", o.run_id, "Use this run id instead of a generated one");
  auto* batch = app.add_subcommand("batch", "Execute N independent runs");
  batch->add_option("--runs", o.runs, "Number of runs")->capture_default_str();
  batch->add_option("--parallel-runs", o.parallel_runs, "Runs executed concurrently")->capture_default_str();
  auto* lint = app.add_subcommand("lint", "Cross-artifact consistency checks for a run");
  lint->add_option("run_id", o.run_id, "Run to lint")->required();
  lint->add_flag("--json", o.json, "Machine-readable output");
  auto* eval = app.add_subcommand("eval", "Aggregate Likert scores into the criterion table");
  eval->add_option("--scores", o.scores, "CSV or JSON-lines score file")->required();
  eval->add_option("--pooling", o.pooling, "pooled or nested")->capture_default_str();
  eval->add_option("--out", o.out_file, "Also write the report here");
  eval->add_flag("--json", o.json, "Machine-readable output");
  auto* report = app.add_subcommand("report", "Show a run manifest");
  report->add_option("run_id", o.run_id, "Run to show")->required();
  report->add_flag("--json", o.json, "Print the manifest JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }

  try {
    if (*generate) return detail::cmd_generate(o, out, err);
    if (*batch) return detail::cmd_batch(o, out, err);
    if (*lint) return detail::cmd_lint(o, out, err);
    if (*eval) return detail::cmd_eval(o, out, err);
    if (*report) return detail::cmd_report(o, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const evalkit::EvalError& e) {
    err << "eval error: " << e.what() << "\n";
  } catch (const store::StoreError& e) {
    err << "store error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return exit_code::kConfig;
}

}  // namespace questforge::cli
