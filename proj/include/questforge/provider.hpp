#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace questforge::provider {

inline constexpr double kDefaultTemperature = 1.0;
inline constexpr std::int64_t kDefaultMaxOutputTokens = 32768;
inline constexpr std::string_view kDefaultModel = "gpt-5";

struct ChatRequest {
  std::string system_message;
  std::string user_message;
  double temperature = kDefaultTemperature;
  std::int64_t max_output_tokens = kDefaultMaxOutputTokens;
  std::string model_name{kDefaultModel};
  /// Which stage issued the request ("world", "extended:M3", ...). Not sent on the wire.
  std::string stage_tag;

  bool operator==(const ChatRequest&) const = default;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool operator==(const TokenUsage&) const = default;
};

struct ChatResponse {
  std::string text;
  std::optional<TokenUsage> usage;
  std::map<std::string, std::string> provider_meta;
};

enum class ErrorKind { Transport, Auth, BudgetExceeded, ScriptExhausted, ScriptMismatch, InvalidRequest };

constexpr std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Transport: return "TransportError";
    case ErrorKind::Auth: return "AuthError";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::ScriptExhausted: return "ScriptExhausted";
    case ErrorKind::ScriptMismatch: return "ScriptMismatch";
    case ErrorKind::InvalidRequest: return "InvalidRequest";
  }
  return "ProviderError";
}

/// Any failure to obtain text from the backend. Content problems in text that
/// did arrive are never reported this way.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline void check_request(const ChatRequest& request) {
  if (!(request.temperature >= 0.0)) throw ProviderError(ErrorKind::InvalidRequest, "temperature must be >= 0");
  if (request.max_output_tokens < 1) throw ProviderError(ErrorKind::InvalidRequest, "max_output_tokens must be >= 1");
}

/// Chat-completion backend. `complete` returns the model text verbatim.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Scripted provider

struct FixtureEntry {
  std::optional<std::string> stage;
  std::string text;
  bool operator==(const FixtureEntry&) const = default;
};

class FixtureParseError : public std::runtime_error {
 public:
  FixtureParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(line == 0 ? what
                                     : what + " (line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ")"),
        line_(line), column_(column) {}
  /// 0 when the error is structural rather than positional.
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Ordered canned responses. Each entry is handed out once.
class FixtureScript {
 public:
  FixtureScript() = default;
  explicit FixtureScript(std::vector<FixtureEntry> entries) : entries_(std::move(entries)) {}

  std::size_t size() const { return entries_.size(); }
  std::size_t cursor() const { return cursor_; }
  std::size_t remaining() const { return entries_.size() - cursor_; }
  const std::vector<FixtureEntry>& entries() const { return entries_; }

  const FixtureEntry& next() {
    if (cursor_ >= entries_.size()) {
      throw ProviderError(ErrorKind::ScriptExhausted,
                          "fixture script has " + std::to_string(entries_.size()) + " entries, all consumed");
    }
    return entries_[cursor_++];
  }

 private:
  std::vector<FixtureEntry> entries_;
  std::size_t cursor_ = 0;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace detail

/// Parses the fixture format: a JSON array of {"stage"?: string, "text": string}.
inline FixtureScript parse_fixture(std::string_view content) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = detail::line_column(content, e.byte > 0 ? e.byte - 1 : 0);
    throw FixtureParseError("fixture is not valid JSON", line, column);
  }
  if (!doc.is_array()) throw FixtureParseError("fixture must be a JSON array", 0, 0);
  std::vector<FixtureEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const auto where = "fixture entry " + std::to_string(i);
    if (!item.is_object()) throw FixtureParseError(where + " is not an object", 0, 0);
    auto text = item.find("text");
    if (text == item.end() || !text->is_string()) {
      throw FixtureParseError(where + " needs a string \"text\"", 0, 0);
    }
    FixtureEntry entry{std::nullopt, text->get<std::string>()};
    if (auto stage = item.find("stage"); stage != item.end() && !stage->is_null()) {
      if (!stage->is_string()) throw FixtureParseError(where + " has a non-string \"stage\"", 0, 0);
      entry.stage = stage->get<std::string>();
    }
    entries.push_back(std::move(entry));
  }
  return FixtureScript(std::move(entries));
}

inline FixtureScript load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FixtureParseError("cannot open fixture " + path.string(), 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_fixture(ss.str());
}

inline nlohmann::json fixture_to_json(const FixtureScript& script) {
  auto out = nlohmann::json::array();
  for (const auto& e : script.entries()) {
    nlohmann::json item{{"text", e.text}};
    if (e.stage) item["stage"] = *e.stage;
    out.push_back(std::move(item));
  }
  return out;
}

/// True when a fixture entry tagged `entry_stage` may answer a request tagged
/// `request_tag`; "extended" matches any "extended:<id>".
inline bool stage_matches(std::string_view entry_stage, std::string_view request_tag) {
  if (entry_stage == request_tag) return true;
  const auto colon = request_tag.find(':');
  return colon != std::string_view::npos && entry_stage == request_tag.substr(0, colon);
}

/// Replays a FixtureScript. Not safe for unsynchronised concurrent use.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(FixtureScript script) : script_(std::move(script)) {}

  ChatResponse complete(const ChatRequest& request) override {
    check_request(request);
    const auto& entry = script_.next();
    if (entry.stage && !request.stage_tag.empty() && !stage_matches(*entry.stage, request.stage_tag)) {
      throw ProviderError(ErrorKind::ScriptMismatch, "entry " + std::to_string(script_.cursor() - 1) +
                                                         " is tagged '" + *entry.stage + "' but request is for '" +
                                                         request.stage_tag + "'");
    }
    ChatResponse response;
    response.text = entry.text;
    response.provider_meta["fixture_index"] = std::to_string(script_.cursor() - 1);
    return response;
  }

  const FixtureScript& script() const { return script_; }

 private:
  FixtureScript script_;
};

/// Serialises access to another provider.
class SerializedProvider : public Provider {
 public:
  explicit SerializedProvider(Provider& inner) : inner_(inner) {}
  ChatResponse complete(const ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    return inner_.complete(request);
  }

 private:
  Provider& inner_;
  std::mutex mutex_;
};

/// Records every request and response passing through to `inner`.
class RecordingProvider : public Provider {
 public:
  struct Exchange {
    ChatRequest request;
    std::optional<std::string> response_text;
    std::optional<std::string> error;
  };

  explicit RecordingProvider(Provider& inner) : inner_(inner) {}

  ChatResponse complete(const ChatRequest& request) override {
    try {
      auto response = inner_.complete(request);
      std::lock_guard lock(mutex_);
      exchanges_.push_back({request, response.text, std::nullopt});
      return response;
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      exchanges_.push_back({request, std::nullopt, e.what()});
      throw;
    }
  }

  std::vector<Exchange> exchanges() const {
    std::lock_guard lock(mutex_);
    return exchanges_;
  }
  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return exchanges_.size();
  }

 private:
  Provider& inner_;
  mutable std::mutex mutex_;
  std::vector<Exchange> exchanges_;
};

// ---------------------------------------------------------------------------
// Retry

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;

  std::chrono::milliseconds delay_before(int attempt) const {
    // attempt is 1-based; no delay before the first
    if (attempt <= 1) return std::chrono::milliseconds{0};
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 2; i < attempt; ++i) ms *= multiplier;
    return std::chrono::milliseconds{static_cast<std::int64_t>(ms)};
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Calls `attempt_once` until it succeeds, retrying only ErrorKind::Transport.
template <class Fn>
auto with_retries(const RetryPolicy& policy, const Sleeper& sleep, Fn&& attempt_once) {
  for (int attempt = 1;; ++attempt) {
    if (attempt > 1) sleep(policy.delay_before(attempt));
    try {
      return attempt_once();
    } catch (const ProviderError& e) {
      if (e.kind() != ErrorKind::Transport || attempt >= policy.max_attempts) throw;
    }
  }
}

}  // namespace questforge::provider
