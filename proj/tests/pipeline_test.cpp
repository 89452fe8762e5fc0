#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include "support.hpp"

using namespace questforge;
using namespace qf_test;
using store::read_file;

namespace {

provider::ScriptedProvider scripted(const std::string& fixture) {
  return provider::ScriptedProvider(provider::load_fixture(fixture_path(fixture)));
}

std::vector<std::string> files_in(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

// Answers by stage tag, so call order does not matter. Thread-safe.
class KeyedProvider : public provider::Provider {
 public:
  explicit KeyedProvider(const provider::FixtureScript& script) {
    for (const auto& e : script.entries()) answers_[*e.stage].push_back(e.text);
  }

  provider::ChatResponse complete(const provider::ChatRequest& request) override {
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    provider::ChatResponse r;
    {
      std::lock_guard lock(mutex_);
      tags_.push_back(request.stage_tag);
      auto& queue = answers_.at(request.stage_tag);
      r.text = queue.front();
      queue.erase(queue.begin());
    }
    --in_flight_;
    return r;
  }

  int max_in_flight() const { return max_in_flight_; }
  std::vector<std::string> tags() const {
    std::lock_guard lock(mutex_);
    return tags_;
  }

 private:
  std::map<std::string, std::vector<std::string>> answers_;
  std::vector<std::string> tags_;
  mutable std::mutex mutex_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

// Delegates, but fails with a transport error for one stage tag.
class FailOn : public provider::Provider {
 public:
  FailOn(provider::Provider& inner, std::string tag) : inner_(inner), tag_(std::move(tag)) {}
  provider::ChatResponse complete(const provider::ChatRequest& request) override {
    if (request.stage_tag == tag_) throw provider::ProviderError(provider::ErrorKind::Transport, "connection reset");
    return inner_.complete(request);
  }

 private:
  provider::Provider& inner_;
  std::string tag_;
};

// raw-before-structured: within an outcome every raw write precedes the artifact
void check_write_order(const RunManifest& m) {
  std::uint64_t last = 0;
  for (const auto& o : m.outcomes) {
    for (const auto& a : o.attempts) {
      if (!a.raw) {
        CHECK(a.provider_error);
        continue;
      }
      CHECK(a.raw->sequence > last);
      last = a.raw->sequence;
    }
    if (o.artifact) {
      CHECK(o.artifact->sequence > last);
      last = o.artifact->sequence;
    }
  }
}

}  // namespace

TEST_CASE("a full fixture run makes one call per stage and per quest", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("full_run.json");
  auto result = execute_run(config_for("full"), p, store);
  CHECK(result.manifest.status == RunStatus::Completed);
  CHECK(result.exit_code() == exit_code::kSuccess);
  CHECK(result.manifest.total_invocations() == 14);
  CHECK(result.manifest.outcomes.size() == 14);
  CHECK(result.manifest.count(Disposition::Accepted) == 14);
  CHECK(result.state.npcs->size() == 10);
  CHECK(result.state.quests->size() == 10);
  CHECK(result.state.extended.size() == 10);
  CHECK(result.state.player->name == "Tairn Latch");
  CHECK(p.script().remaining() == 0);
  CHECK(files_in(store.run_dir("full") / "artifacts").size() == 14);
  CHECK(files_in(store.run_dir("full") / "raw").size() == 14);
  check_write_order(result.manifest);
}

TEST_CASE("stages run in order with the expected tags", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto script = provider::load_fixture(fixture_path("full_run.json"));
  KeyedProvider p(script);
  execute_run(config_for("order"), p, store);
  std::vector<std::string> expected;
  for (const auto& e : script.entries()) expected.push_back(*e.stage);
  CHECK(p.tags() == expected);
}

TEST_CASE("requests carry the configured generation settings", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto inner = scripted("full_run.json");
  provider::RecordingProvider p(inner);
  auto cfg = config_for("settings");
  cfg.temperature = 0.7;
  cfg.max_output_tokens = 4096;
  cfg.model = "test-model";
  auto result = execute_run(cfg, p, store);
  for (const auto& x : p.exchanges()) {
    CHECK(x.request.temperature == 0.7);
    CHECK(x.request.max_output_tokens == 4096);
    CHECK(x.request.model_name == "test-model");
  }
  // the extended prompt embeds the accepted source quest verbatim
  auto last = p.exchanges().back();
  CHECK(last.request.user_message.find(schema::canonical_serialize(result.state.quests->back())) != std::string::npos);
  CHECK(last.request.stage_tag == "extended:M10");
}

TEST_CASE("a world that never parses halts the run with raw text kept", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("halt_world.json");
  auto cfg = config_for("halt");
  cfg.retries_per_stage = 0;
  try {
    execute_run(cfg, p, store);
    FAIL("expected HaltedAtStage");
  } catch (const HaltedAtStage& h) {
    CHECK(h.stage() == StageKind::World);
    CHECK(h.manifest().status == RunStatus::Halted);
    CHECK(h.manifest().total_invocations() == 1);
    CHECK_FALSE(h.state().world);
    CHECK(h.manifest().outcomes.at(0).disposition == Disposition::HaltedPipeline);
    CHECK(h.cause().find("NoJsonFound") != std::string::npos);
  }
  const auto run = store.run_dir("halt");
  CHECK(files_in(run / "raw") == std::vector<std::string>{"world_attempt1.txt"});
  CHECK(files_in(run / "artifacts").empty());
  CHECK(read_file(run / "raw/world_attempt1.txt") == provider::load_fixture(fixture_path("halt_world.json")).entries()[0].text);
  auto m = store.read_manifest("halt");
  CHECK(m.halted_at == StageKind::World);
}

TEST_CASE("one retry consumes the second scripted world before halting", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("halt_world.json");
  CHECK_THROWS_AS(execute_run(config_for("halt2"), p, store), HaltedAtStage);
  CHECK(files_in(store.run_dir("halt2") / "raw") == std::vector<std::string>{"world_attempt1.txt", "world_attempt2.txt"});
  auto m = store.read_manifest("halt2");
  REQUIRE(m.outcomes.size() == 1);
  CHECK(m.outcomes[0].attempts[0].extraction == ExtractError::NoJsonFound);
  CHECK(m.outcomes[0].attempts[1].extraction == ExtractError::UnbalancedJson);
}

TEST_CASE("a failing extended quest is skipped and the others still run", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("extended_fail_m3.json");
  auto result = execute_run(config_for("skip"), p, store);
  CHECK(result.manifest.status == RunStatus::CompletedWithSkips);
  CHECK(result.exit_code() == exit_code::kSkipped);
  CHECK(result.manifest.total_invocations() == 15);
  CHECK(result.manifest.count(Disposition::SkippedPreservedRaw) == 1);
  CHECK(result.manifest.count(Disposition::Accepted) == 13);
  CHECK(result.state.extended.size() == 9);
  CHECK_FALSE(result.state.extended.count("M3"));
  const auto& m3 = result.manifest.outcomes.at(6);
  CHECK(m3.quest_id == "M3");
  CHECK(m3.attempt_count() == 2);
  REQUIRE(m3.validation());
  CHECK_FALSE(m3.validation()->valid());
  CHECK(m3.validation()->has_code(schema::codes::kEmptyValue));
  CHECK(fs::exists(store.run_dir("skip") / "raw/extended_M3_attempt2.txt"));
  check_write_order(result.manifest);
}

TEST_CASE("a provider failure during expansion halts the run", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  KeyedProvider inner(provider::load_fixture(fixture_path("full_run.json")));
  FailOn p(inner, "extended:M4");
  try {
    execute_run(config_for("pfail"), p, store);
    FAIL("expected HaltedAtStage");
  } catch (const HaltedAtStage& h) {
    CHECK(h.stage() == StageKind::ExtendedQuest);
    CHECK(h.manifest().outcomes.back().provider_failed());
    CHECK(h.manifest().outcomes.back().raw_text().empty());
    CHECK(h.state().extended.size() == 3);
    CHECK(h.cause().find("connection reset") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(store.run_dir("pfail") / "raw/extended_M4_attempt1.txt"));
}

TEST_CASE("a provider failure at an early stage halts without raw text", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  KeyedProvider inner(provider::load_fixture(fixture_path("full_run.json")));
  FailOn p(inner, "player");
  CHECK_THROWS_AS(execute_run(config_for("pfail"), p, store), HaltedAtStage);
  auto loaded = store.load_run("pfail");
  CHECK(loaded.state.npcs);
  CHECK_FALSE(loaded.state.player);
  CHECK(files_in(store.run_dir("pfail") / "raw").size() == 2);
}

TEST_CASE("replaying a fixture gives the same manifest and state", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p1 = scripted("extended_fail_m3.json");
  auto p2 = scripted("extended_fail_m3.json");
  auto a = execute_run(config_for("a"), p1, store);
  auto b = execute_run(config_for("b"), p2, store);
  CHECK(a.state == b.state);
  CHECK(manifest_fingerprint(a.manifest) == manifest_fingerprint(b.manifest));
  for (const auto& name : files_in(store.run_dir("a") / "artifacts")) {
    CHECK(read_file(store.run_dir("a") / "artifacts" / name) == read_file(store.run_dir("b") / "artifacts" / name));
  }
}

TEST_CASE("parallel expansion matches sequential expansion", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  const auto script = provider::load_fixture(fixture_path("full_run.json"));
  KeyedProvider seq_p(script);
  auto seq = execute_run(config_for("seq"), seq_p, store);

  KeyedProvider par_p(script);
  auto cfg = config_for("par");
  cfg.extended_parallelism = 4;
  auto par = execute_run(cfg, par_p, store);
  CHECK(par_p.max_in_flight() > 1);
  CHECK(par.state == seq.state);
  REQUIRE(par.manifest.outcomes.size() == 14);
  for (std::size_t i = 4; i < 14; ++i) {
    CHECK(par.manifest.outcomes[i].quest_id == seq.manifest.outcomes[i].quest_id);
  }
  CHECK(store.audit_run("par").empty());
}

TEST_CASE("count mismatches warn by default and fail when strict", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("full_run.json");
  auto result = execute_run(config_for("lenient", 8, 10), p, store);
  const auto& npcs = result.manifest.outcomes.at(1);
  CHECK(npcs.disposition == Disposition::Accepted);
  CHECK(npcs.validation()->has_code(schema::codes::kCountMismatch));

  auto strict_p = scripted("full_run.json");
  auto cfg = config_for("strict", 8, 10);
  cfg.strict_counts = true;
  cfg.retries_per_stage = 0;
  try {
    execute_run(cfg, strict_p, store);
    FAIL("expected HaltedAtStage");
  } catch (const HaltedAtStage& h) {
    CHECK(h.stage() == StageKind::NpcRoster);
    CHECK(h.cause().find("CountMismatch") != std::string::npos);
  }
}

TEST_CASE("invalid configuration is rejected before any call", "[pipeline]") {
  TempDir dir;
  store::RunStore store(dir.path());
  auto p = scripted("full_run.json");
  auto bad = [&](auto mutate) {
    auto cfg = config_for("cfg");
    mutate(cfg);
    CHECK_THROWS_AS(execute_run(cfg, p, store), ConfigError);
  };
  bad([](RunConfig& c) { c.npcs = 0; });
  bad([](RunConfig& c) { c.quests = 0; });
  bad([](RunConfig& c) { c.temperature = -1.0; });
  bad([](RunConfig& c) { c.max_output_tokens = 0; });
  bad([](RunConfig& c) { c.retries_per_stage = -1; });
  bad([](RunConfig& c) { c.extended_parallelism = 0; });
  bad([](RunConfig& c) { c.run_id = "a/b"; });
  bad([](RunConfig& c) { c.model.clear(); });
  CHECK(p.script().cursor() == 0);

  execute_run(config_for("dup"), p, store);
  auto again = scripted("full_run.json");
  CHECK_THROWS_AS(execute_run(config_for("dup"), again, store), ConfigError);
  CHECK(again.script().cursor() == 0);
}

TEST_CASE("generated runs pass through the pipeline unchanged", "[pipeline][property]") {
  Rng rng(99);
  TempDir dir;
  store::RunStore store(dir.path());
  for (int i = 0; i < 60; ++i) {
    const auto state = gen::run_state(rng);
    provider::ScriptedProvider p(script_for(state));
    auto cfg = config_for("g" + std::to_string(i), state.npcs->size(), state.quests->size());
    auto result = execute_run(cfg, p, store);
    REQUIRE(result.manifest.status == RunStatus::Completed);
    CHECK(result.state == state);
    CHECK(result.manifest.total_invocations() == 4 + state.quests->size());
    CHECK(result.state.ordered());
    check_write_order(result.manifest);
  }
}

TEST_CASE("every outcome keeps the raw text of each attempt", "[pipeline][property]") {
  // random mixes of good, unparseable and invalid responses per extended quest
  Rng rng(7);
  TempDir dir;
  store::RunStore store(dir.path());
  for (int i = 0; i < 40; ++i) {
    const auto state = gen::run_state(rng);
    auto entries = script_for(state).entries();
    std::vector<provider::FixtureEntry> script(entries.begin(), entries.begin() + 4);
    std::map<std::string, int> bad_attempts;
    for (std::size_t q = 0; q < state.quests->size(); ++q) {
      const auto& id = (*state.quests)[q].id;
      const int bad = static_cast<int>(gen::below(rng, 3));  // 2 exhausts the single retry
      bad_attempts[id] = bad;
      for (int k = 0; k < bad; ++k) {
        script.push_back({"extended:" + id, k % 2 ? std::string("{\"id\": \"") + id + "\"}" : "no json here"});
      }
      if (bad < 2) script.push_back(entries[4 + q]);
    }
    provider::ScriptedProvider p{provider::FixtureScript(script)};
    const auto id = "r" + std::to_string(i);
    auto result = execute_run(config_for(id, state.npcs->size(), state.quests->size()), p, store);
    CHECK(p.script().remaining() == 0);
    for (const auto& o : result.manifest.outcomes) {
      for (const auto& a : o.attempts) {
        REQUIRE(a.raw);
        CHECK(read_file(store.run_dir(id) / a.raw->path) == a.raw_text);
      }
      if (o.stage != StageKind::ExtendedQuest) continue;
      const int bad = bad_attempts.at(*o.quest_id);
      CHECK(o.attempt_count() == std::min(bad + 1, 2));
      CHECK((o.disposition == Disposition::Accepted) == (bad < 2));
      CHECK(o.artifact.has_value() == (bad < 2));
    }
    check_write_order(result.manifest);
  }
}
