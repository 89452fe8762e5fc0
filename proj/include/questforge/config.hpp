#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "questforge/prompts.hpp"
#include "questforge/provider.hpp"

namespace questforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::size_t npcs = 10;
  std::size_t quests = 10;
  double temperature = provider::kDefaultTemperature;
  std::int64_t max_output_tokens = provider::kDefaultMaxOutputTokens;
  std::string model{provider::kDefaultModel};
  prompts::SubsetPolicy subset_policy;
  std::string user_intent;
  std::size_t extended_parallelism = 1;
  int retries_per_stage = 1;
  bool strict_counts = false;
  std::string run_id;

  void validate() const {
    if (npcs < 1 || quests < 1) throw ConfigError("npc and quest counts must be >= 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (max_output_tokens < 1) throw ConfigError("max output tokens must be >= 1");
    if (extended_parallelism < 1) throw ConfigError("extended parallelism must be >= 1");
    if (retries_per_stage < 0) throw ConfigError("retries per stage must be >= 0");
    if (model.empty()) throw ConfigError("model name must not be empty");
    if (subset_policy.mode == prompts::SubsetPolicy::Mode::FirstK && subset_policy.k < 1) {
      throw ConfigError("FirstK subset needs k >= 1");
    }
    if (run_id.empty()) throw ConfigError("run id must not be empty");
    if (run_id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.") !=
            std::string::npos ||
        run_id == "." || run_id == "..") {
      throw ConfigError("run id '" + run_id + "' contains characters not allowed in a directory name");
    }
  }

  bool operator==(const RunConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"npcs", c.npcs},
                     {"quests", c.quests},
                     {"temperature", c.temperature},
                     {"max_output_tokens", c.max_output_tokens},
                     {"model", c.model},
                     {"subset_policy", prompts::to_string(c.subset_policy)},
                     {"user_intent", c.user_intent},
                     {"extended_parallelism", c.extended_parallelism},
                     {"retries_per_stage", c.retries_per_stage},
                     {"strict_counts", c.strict_counts},
                     {"run_id", c.run_id}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.npcs = j.at("npcs").get<std::size_t>();
  c.quests = j.at("quests").get<std::size_t>();
  c.temperature = j.at("temperature").get<double>();
  c.max_output_tokens = j.at("max_output_tokens").get<std::int64_t>();
  c.model = j.at("model").get<std::string>();
  c.subset_policy = prompts::parse_subset_policy(j.at("subset_policy").get<std::string>());
  c.user_intent = j.at("user_intent").get<std::string>();
  c.extended_parallelism = j.at("extended_parallelism").get<std::size_t>();
  c.retries_per_stage = j.at("retries_per_stage").get<int>();
  c.strict_counts = j.at("strict_counts").get<bool>();
  c.run_id = j.at("run_id").get<std::string>();
}

/// UTC timestamp plus a short random suffix, e.g. "20261016T101500Z-3fa9c1".
inline std::string make_run_id() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char suffix[8];
  std::snprintf(suffix, sizeof suffix, "%06llx", static_cast<unsigned long long>(rng() & 0xffffffULL));
  return std::string(stamp) + "-" + suffix;
}

inline std::string format_utc(std::chrono::system_clock::time_point tp) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp - secs).count();
  const auto t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

}  // namespace questforge
