#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "questforge/provider.hpp"

namespace questforge::provider {

inline constexpr std::string_view kDefaultEndpoint = "https://api.openai.com/v1";
inline constexpr std::string_view kApiKeyEnv = "OPENAI_API_KEY";

struct HttpConfig {
  /// Base URL; requests go to <endpoint>/chat/completions.
  std::string endpoint{kDefaultEndpoint};
  std::string api_key;
  RetryPolicy retry;
  std::chrono::seconds connect_timeout{30};
  std::chrono::seconds read_timeout{900};
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

inline ParsedUrl split_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ProviderError(ErrorKind::InvalidRequest, "endpoint '" + std::string(url) + "' has no scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = std::string(url.substr(0, path_start));
  out.path = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

/// The chat-completion request body: two messages plus sampling parameters.
inline nlohmann::json build_request_body(const ChatRequest& request) {
  return nlohmann::json{
      {"model", request.model_name},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", request.system_message}},
                              {{"role", "user"}, {"content", request.user_message}}})},
      {"temperature", request.temperature},
      {"max_completion_tokens", request.max_output_tokens},
  };
}

/// Maps a non-200 reply onto an error kind.
inline ProviderError classify_http_failure(int status, const std::string& body) {
  std::string detail = "HTTP " + std::to_string(status);
  std::string code;
  auto parsed = nlohmann::json::parse(body, nullptr, false);
  if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("error") && parsed["error"].is_object()) {
    const auto& err = parsed["error"];
    if (err.contains("message") && err["message"].is_string()) detail += ": " + err["message"].get<std::string>();
    if (err.contains("code") && err["code"].is_string()) code = err["code"].get<std::string>();
  }
  if (status == 401 || status == 403) return {ErrorKind::Auth, detail};
  if (status == 413 || code == "context_length_exceeded" ||
      (status == 400 && (detail.find("max_tokens") != std::string::npos ||
                         detail.find("max_completion_tokens") != std::string::npos ||
                         detail.find("maximum context") != std::string::npos))) {
    return {ErrorKind::BudgetExceeded, detail};
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) return {ErrorKind::Transport, detail};
  return {ErrorKind::InvalidRequest, detail};
}

inline ChatResponse parse_completion(const std::string& body) {
  auto parsed = nlohmann::json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ProviderError(ErrorKind::Transport, "completion reply is not a JSON object");
  }
  ChatResponse out;
  const auto choices = parsed.find("choices");
  if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
    throw ProviderError(ErrorKind::Transport, "completion reply has no choices");
  }
  const auto& choice = (*choices)[0];
  if (choice.contains("message") && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    out.text = choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    out.provider_meta["finish_reason"] = choice["finish_reason"].get<std::string>();
  }
  for (const char* key : {"id", "model"}) {
    if (parsed.contains(key) && parsed[key].is_string()) out.provider_meta[key] = parsed[key].get<std::string>();
  }
  if (auto usage = parsed.find("usage"); usage != parsed.end() && usage->is_object()) {
    TokenUsage u;
    u.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    u.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
    out.usage = u;
  }
  return out;
}

/// Chat-completion client for OpenAI-compatible endpoints. Stateless per
/// request, so one instance may be shared across threads.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpConfig config, Sleeper sleeper = real_sleeper())
      : config_(std::move(config)), url_(split_url(config_.endpoint)), sleeper_(std::move(sleeper)) {}

  ChatResponse complete(const ChatRequest& request) override {
    check_request(request);
    if (config_.api_key.empty()) throw ProviderError(ErrorKind::Auth, "no API credential configured");
    const auto body = build_request_body(request).dump();
    return with_retries(config_.retry, sleeper_, [&] { return post_once(body); });
  }

  const HttpConfig& config() const { return config_; }

 private:
  ChatResponse post_once(const std::string& body) const {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(config_.connect_timeout);
    client.set_read_timeout(config_.read_timeout);
    client.set_write_timeout(config_.connect_timeout);
    const httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};
    auto res = client.Post(url_.path + "/chat/completions", headers, body, "application/json");
    if (!res) throw ProviderError(ErrorKind::Transport, httplib::to_string(res.error()));
    if (res->status != 200) throw classify_http_failure(res->status, res->body);
    return parse_completion(res->body);
  }

  HttpConfig config_;
  ParsedUrl url_;
  Sleeper sleeper_;
};

}  // namespace questforge::provider
