#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace questforge {

enum class ExtractError { None, NoJsonFound, UnbalancedJson, InvalidJson };

constexpr std::string_view extract_error_name(ExtractError error) {
  switch (error) {
    case ExtractError::None: return "None";
    case ExtractError::NoJsonFound: return "NoJsonFound";
    case ExtractError::UnbalancedJson: return "UnbalancedJson";
    case ExtractError::InvalidJson: return "InvalidJson";
  }
  return "Unknown";
}

/// Result of locating a JSON payload in model text. The raw text is never
/// touched; `text` is a copy of the located span.
struct Extraction {
  ExtractError error = ExtractError::None;
  std::string text;
  nlohmann::json value;
  std::string message;

  bool ok() const { return error == ExtractError::None; }
};

namespace detail {

inline bool at_line_start(std::string_view raw, std::size_t pos) {
  while (pos > 0 && (raw[pos - 1] == ' ' || raw[pos - 1] == '\t')) --pos;
  return pos == 0 || raw[pos - 1] == '\n';
}

// Returns the region inside the outermost markdown fence, or the whole input
// when there is no fence. Only a ``` that begins a line counts as a fence, so
// backticks inside JSON strings are ignored. The opening fence line (with its
// language tag) is dropped; an unterminated fence runs to end of input.
inline std::string_view strip_fences(std::string_view raw) {
  constexpr std::string_view fence = "```";
  auto open = raw.find(fence);
  while (open != std::string_view::npos && !at_line_start(raw, open)) open = raw.find(fence, open + 1);
  if (open == std::string_view::npos) return raw;
  auto body_start = raw.find('\n', open + fence.size());
  if (body_start == std::string_view::npos) {
    body_start = open + fence.size();
  } else {
    ++body_start;
  }
  auto close = raw.rfind(fence);
  while (close != std::string_view::npos && close > open && !at_line_start(raw, close)) close = raw.rfind(fence, close - 1);
  if (close == std::string_view::npos || close <= open || close < body_start) return raw.substr(body_start);
  return raw.substr(body_start, close - body_start);
}

// Length of the balanced value starting at text[start] ('{' or '['), or npos
// if the input ends first. String literals and escapes are honoured.
inline std::size_t balanced_span(std::string_view text, std::size_t start) {
  std::size_t depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{':
      case '[': ++depth; break;
      case '}':
      case ']':
        if (--depth == 0) return i - start + 1;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

inline Extraction scan_region(std::string_view region) {
  Extraction result;
  std::string first_parse_error;
  std::size_t pos = 0;
  bool saw_candidate = false;
  while (true) {
    pos = region.find_first_of("{[", pos);
    if (pos == std::string_view::npos) break;
    saw_candidate = true;
    const auto len = balanced_span(region, pos);
    if (len == std::string_view::npos) {
      if (first_parse_error.empty()) {
        result.error = ExtractError::UnbalancedJson;
        result.message = "opening '" + std::string(1, region[pos]) + "' at offset " +
                         std::to_string(pos) + " is never closed";
        return result;
      }
      break;
    }
    const auto candidate = region.substr(pos, len);
    auto parsed = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) {
      result.text = std::string(candidate);
      result.value = std::move(parsed);
      return result;
    }
    if (first_parse_error.empty()) {
      first_parse_error = "balanced span at offset " + std::to_string(pos) + " is not valid JSON";
    }
    // skip the whole span so a nested fragment of a broken document is never picked
    pos += len;
  }
  if (!saw_candidate) {
    result.error = ExtractError::NoJsonFound;
    result.message = "no '{' or '[' in model output";
  } else {
    result.error = ExtractError::InvalidJson;
    result.message = first_parse_error;
  }
  return result;
}

}  // namespace detail

/// Locates the first balanced JSON value in model output, looking inside the
/// outermost code fence first and falling back to the whole text.
inline Extraction extract_json(std::string_view raw) {
  const auto fenced = detail::strip_fences(raw);
  if (fenced.size() == raw.size()) return detail::scan_region(raw);
  auto inner = detail::scan_region(fenced);
  if (inner.ok()) return inner;
  auto whole = detail::scan_region(raw);
  // the fenced region's diagnosis is the more specific one
  return whole.ok() || inner.error == ExtractError::NoJsonFound ? whole : inner;
}

}  // namespace questforge
