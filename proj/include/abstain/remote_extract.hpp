// Copyright 2026 The Abstain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Optional remote extraction through an OpenAI-compatible chat endpoint, with
// a rule-based fallback when the call cannot be completed.

#pragma once

#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "abstain/common.hpp"
#include "abstain/retrieval.hpp"

namespace abstain {

enum class PromptKind { SubContext, KG };

inline constexpr std::string_view kSubContextPrompt =
    "You are a top-tier algorithm designed for extracting sentences with time information in "
    "the text. Try to capture as much time information from the text as possible without "
    "sacrificing accuracy. Do not add any information that is not explicitly mentioned in the "
    "text. Your task is to identify the complete sentences with time information requested with "
    "the user prompt from a given text related to the given query. You must generate the output "
    "in a JSON format containing a list of complete sentences with time information from the "
    "given text.\n"
    "\n"
    "IMPORTANT NOTES:\n"
    "- Don't add any explanation and text. Don't change the original sentence.\n"
    "- Identify all the events or actions that have time-related details.\n"
    "\n"
    "Query: <question>\n"
    "Context: <context>\n"
    "assistant:";

inline constexpr std::string_view kKgPrompt =
    "You are a top-tier algorithm designed for extracting information in structured formats to "
    "build a knowledge graph. Try to capture as much information from the text as possible "
    "without sacrificing accuracy. Do not add any information that is not explicitly mentioned "
    "in the text. Your task is to identify the entities and relations and timestamps requested "
    "with the user prompt from a given text. You must generate the output in a JSON format "
    "containing a list with JSON objects. Each object should have the keys: \"head\", "
    "\"head_type\", \"relation\", \"tail\", \"tail_type\" and \"timestamp\". The \"head\" key "
    "must contain the text of the extracted entity. The \"head_type\" key must contain the type "
    "of the extracted head entity, The \"relation\" key must contain the type of relation "
    "between the \"head\" and the \"tail\". The \"tail\" key must represent the text of an "
    "extracted entity which is the tail of the relation, and the \"tail_type\" key must contain "
    "the type of the tail entity. The \"timestamp\" key must contain the timestamp of the event "
    "if it is present in the text. If the timestamp is not present, the value of the "
    "\"timestamp\" key must be null. Your task is to extract relationships from text strictly "
    "adhering to the provided schema. The relationships can only appear between specific node "
    "types are presented in the schema format like: (Entity1Type, RELATIONSHIP_TYPE, "
    "Entity2Type, TIME) /n Attempt to extract as many entities and relations as you can. "
    "Maintain Entity Consistency: When extracting entities, it's vital to ensure consistency. "
    "If an entity, such as \"John Doe\", is mentioned multiple times in the text but is "
    "referred to by different names or pronouns (e.g., \"Joe\", \"he\"), always use the most "
    "complete identifier for that entity. The knowledge graph should be coherent and easily "
    "understandable, so maintaining consistency in entity references is crucial. Identify all "
    "the events or actions that have time-related details.\n"
    "\n"
    "IMPORTANT NOTES:\n"
    "- Don't add any explanation and text.\n"
    "\n"
    "Query: <question>\n"
    "Context: <context>\n"
    "assistant:";

struct ExtractionClientConfig {
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string api_key_env = "ABSTAIN_API_KEY";
  double timeout_seconds = 30.0;
  PromptKind kind = PromptKind::SubContext;

  void validate() const;
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CredentialError : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};
class TransportError : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};
class NonJsonResponseError : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};
class SchemaMismatchError : public ExtractionError {
 public:
  using ExtractionError::ExtractionError;
};

struct ParsedEndpoint {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedEndpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw UsageError("endpoint: missing scheme");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw UsageError("endpoint: scheme must be http(s)");
  const auto rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  const auto host = rest.substr(0, slash);
  if (host.empty() || host.front() == ':') throw UsageError("endpoint: missing host");
  return {std::string(url.substr(0, scheme_end + 3 + host.size())),
          slash == std::string_view::npos ? "/" : std::string(rest.substr(slash))};
}

inline void ExtractionClientConfig::validate() const {
  parse_endpoint(endpoint);
  if (model.empty()) throw UsageError("extraction client: model name is empty");
  if (api_key_env.empty()) throw UsageError("extraction client: api key variable name is empty");
  if (!(timeout_seconds > 0.0)) throw UsageError("extraction client: timeout must be positive");
}

inline std::string build_prompt(PromptKind kind, std::string_view question,
                                std::string_view context) {
  std::string p(kind == PromptKind::SubContext ? kSubContextPrompt : kKgPrompt);
  auto put = [&](std::string_view slot, std::string_view value) {
    if (auto pos = p.find(slot); pos != std::string::npos) p.replace(pos, slot.size(), value);
  };
  put("<question>", question);
  put("<context>", context);
  return p;
}

inline nlohmann::json build_request_body(const ExtractionClientConfig& cfg,
                                         std::string_view question, std::string_view context) {
  return {{"model", cfg.model},
          {"messages", nlohmann::json::array({{{"role", "user"},
                                               {"content", build_prompt(cfg.kind, question,
                                                                        context)}}})}};
}

namespace detail {

// Models often wrap JSON in a ```json fence.
inline std::string strip_code_fence(std::string_view s) {
  std::string t = trim(s);
  if (t.rfind("```", 0) != 0) return t;
  const auto nl = t.find('\n');
  const auto close = t.rfind("```");
  if (nl == std::string::npos || close <= nl) return t;
  return trim(std::string_view(t).substr(nl + 1, close - nl - 1));
}

inline nlohmann::json parse_content(std::string_view body) {
  nlohmann::json envelope;
  try {
    envelope = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw NonJsonResponseError(std::string("response body is not JSON: ") + e.what());
  }
  const auto* content = &envelope;
  if (!envelope.contains("choices") || !envelope["choices"].is_array() ||
      envelope["choices"].empty() || !envelope["choices"][0].contains("message") ||
      !envelope["choices"][0]["message"].contains("content") ||
      !envelope["choices"][0]["message"]["content"].is_string()) {
    throw SchemaMismatchError("response has no choices[0].message.content string");
  }
  content = &envelope["choices"][0]["message"]["content"];
  try {
    return nlohmann::json::parse(strip_code_fence(content->get<std::string>()));
  } catch (const nlohmann::json::parse_error& e) {
    throw NonJsonResponseError(std::string("message content is not JSON: ") + e.what());
  }
}

}  // namespace detail

inline std::vector<std::string> parse_subcontext_response(std::string_view body) {
  const auto j = detail::parse_content(body);
  if (!j.is_array()) throw SchemaMismatchError("expected a JSON list of sentences");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) throw SchemaMismatchError("sentence list contains a non-string");
    out.push_back(s.get<std::string>());
  }
  return out;
}

inline std::vector<Quadruple> parse_kg_response(std::string_view body) {
  const auto j = detail::parse_content(body);
  if (!j.is_array()) throw SchemaMismatchError("expected a JSON list of objects");
  std::vector<Quadruple> out;
  for (const auto& o : j) {
    if (!o.is_object()) throw SchemaMismatchError("KG list contains a non-object");
    for (const char* key : {"head", "head_type", "relation", "tail", "tail_type"}) {
      if (!o.contains(key) || !o[key].is_string()) {
        throw SchemaMismatchError(std::string("KG object missing string key '") + key + "'");
      }
    }
    if (!o.contains("timestamp") || !(o["timestamp"].is_null() || o["timestamp"].is_string())) {
      throw SchemaMismatchError("KG object needs a 'timestamp' string or null");
    }
    Quadruple q{o["head"].get<std::string>(), o["relation"].get<std::string>(),
                o["tail"].get<std::string>(), std::nullopt};
    if (o["timestamp"].is_string()) q.timestamp = o["timestamp"].get<std::string>();
    if (q.head.empty() || q.relation.empty() || q.tail.empty()) {
      throw SchemaMismatchError("KG object has an empty head, relation or tail");
    }
    out.push_back(std::move(q));
  }
  return out;
}

// POSTs the prompt and returns the raw response body.
inline std::string post_extraction(const ExtractionClientConfig& cfg, std::string_view question,
                                   std::string_view context) {
  cfg.validate();
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw CredentialError("environment variable " + cfg.api_key_env + " is not set");
  }
  const ParsedEndpoint ep = parse_endpoint(cfg.endpoint);
  httplib::Client client(ep.scheme_host_port);
  if (!client.is_valid()) throw TransportError("cannot create client for " + ep.scheme_host_port);
  const auto secs = static_cast<time_t>(cfg.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
  const auto body = build_request_body(cfg, question, context).dump();
  auto res = client.Post(ep.path, headers, body, "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP status " + std::to_string(res->status));
  }
  return res->body;
}

using ExtractionResult = std::variant<std::vector<std::string>, std::vector<Quadruple>>;

inline ExtractionResult llm_extract(const ExtractionClientConfig& cfg, std::string_view question,
                                    std::string_view context) {
  const std::string body = post_extraction(cfg, question, context);
  if (cfg.kind == PromptKind::SubContext) return parse_subcontext_response(body);
  return parse_kg_response(body);
}

struct ExtractionOutcome {
  ExtractionResult result;
  std::string source;  // "remote" or "rule-based"
  std::optional<std::string> fallback_reason;
};

// Tries the remote extractor when configured and falls back to the rule-based
// one on any extraction error, recording why.
inline ExtractionOutcome extract_with_fallback(const std::optional<ExtractionClientConfig>& cfg,
                                               PromptKind kind, std::string_view question,
                                               const TimeInterval& question_interval,
                                               std::string_view context) {
  std::optional<std::string> reason;
  if (cfg) {
    ExtractionClientConfig c = *cfg;
    c.kind = kind;
    try {
      return {llm_extract(c, question, context), "remote", std::nullopt};
    } catch (const ExtractionError& e) {
      reason = e.what();
    }
  }
  if (kind == PromptKind::SubContext) {
    return {extract_time_sentences(question_interval, context), "rule-based", reason};
  }
  return {rule_based_quadruples(context), "rule-based", reason};
}

}  // namespace abstain
