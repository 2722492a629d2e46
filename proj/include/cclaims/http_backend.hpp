#pragma once
// HTTP clients for the two external services the toolkit can talk to:
//
//   * an embedding endpoint:  POST {"model", "input": [str]}
//                             ->   {"data": [{"index", "embedding"}]}
//   * a chat-completions endpoint: POST {"model", "messages", "temperature": 0}
//                             ->   {"choices": [{"message": {"content"}}]}
//
// Credentials come exclusively from environment variables (never flags or
// config files, which end up in shell history and commits). When the
// variable is set, requests carry "Authorization: Bearer <value>".
//
// Each request uses a fresh connection, so both clients are safe to call
// concurrently; callers bound parallelism.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cclaims/annotate.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/similarity.hpp"

namespace cclaims {

namespace detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /rest, at least "/"
};

inline ParsedUrl split_url(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint \"" + endpoint + "\" must start with http:// or https://");
  }
  const std::string scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme \"" + scheme + "\"");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") {
    throw ConfigError("this build lacks TLS support; use an http:// endpoint or a local proxy");
  }
#endif
  auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedUrl url;
  if (path_start == std::string::npos) {
    url.base = endpoint;
    url.path = "/";
  } else {
    url.base = endpoint.substr(0, path_start);
    url.path = endpoint.substr(path_start);
  }
  return url;
}

inline httplib::Headers auth_headers(const std::string& credential_env) {
  httplib::Headers headers;
  if (!credential_env.empty()) {
    if (const char* key = std::getenv(credential_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  return headers;
}

// POSTs a JSON body and returns the parsed JSON response, translating
// transport and status failures into BackendError.
inline json post_json(const std::string& endpoint, const std::string& credential_env,
                      int timeout_seconds, const json& body) {
  ParsedUrl url = split_url(endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);

  auto res = client.Post(url.path, auth_headers(credential_env), body.dump(),
                         "application/json");
  if (!res) {
    throw BackendError("request to " + endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    std::string snippet = res->body.substr(0, 200);
    throw BackendError("request to " + endpoint + " returned HTTP " +
                       std::to_string(res->status) + ": " + snippet);
  }
  json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw BackendError("response from " + endpoint + " is not valid JSON");
  }
  return parsed;
}

}  // namespace detail

// Remote embedding provider. One POST per batch; vectors are reassembled by
// the response's "index" field, so out-of-order responses are fine.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(EmbeddingProviderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.kind != EmbeddingProviderKind::external_http) {
      throw ConfigError("HttpEmbedder requires an external_http provider config");
    }
  }

  Embedding embed(const std::string& text) override {
    return embed_batch({text}).front();
  }

  std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    json body{{"model", cfg_.model}, {"input", texts}};
    json response = detail::post_json(cfg_.endpoint, cfg_.credential_env,
                                      cfg_.timeout_seconds, body);
    if (!response.contains("data") || !response["data"].is_array()) {
      throw BackendError("embedding response missing \"data\" array");
    }
    const auto& data = response["data"];
    if (data.size() != texts.size()) {
      throw BackendError("embedding response has " + std::to_string(data.size()) +
                         " entries for " + std::to_string(texts.size()) + " inputs");
    }
    std::vector<Embedding> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    for (const auto& entry : data) {
      if (!entry.is_object() || !entry.contains("index") ||
          !entry["index"].is_number_integer() || !entry.contains("embedding")) {
        throw BackendError("embedding response entry missing \"index\" or \"embedding\"");
      }
      auto idx = entry["index"].get<long long>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= texts.size()) {
        throw BackendError("embedding response index " + std::to_string(idx) + " out of range");
      }
      auto i = static_cast<std::size_t>(idx);
      if (seen[i]) throw BackendError("embedding response repeats index " + std::to_string(idx));
      seen[i] = true;
      out[i] = detail::embedding_from_json(entry["embedding"],
                                           "embedding response index " + std::to_string(idx));
    }
    std::size_t dim = out.front().size();
    for (const auto& v : out) {
      if (v.size() != dim) {
        throw BackendError("embedding response mixes dimensions " + std::to_string(dim) +
                           " and " + std::to_string(v.size()));
      }
    }
    return out;
  }

  std::string name() const override { return "external_http"; }

 private:
  EmbeddingProviderConfig cfg_;
};

inline std::unique_ptr<Embedder> make_embedder(const EmbeddingProviderConfig& cfg) {
  cfg.validate();
  if (cfg.kind == EmbeddingProviderKind::hashed_tf) {
    return std::make_unique<HashedTfEmbedder>(cfg.dim);
  }
  return std::make_unique<HttpEmbedder>(cfg);
}

// Chat-completions client used by the LLM judge and the LLM decompose/merge
// backends. Sends temperature 0 and returns choices[0].message.content.
class HttpChatCompleter : public ChatCompleter {
 public:
  HttpChatCompleter(std::string endpoint, std::string model, std::string credential_env,
                    int timeout_seconds = 60)
      : endpoint_(std::move(endpoint)),
        model_(std::move(model)),
        credential_env_(std::move(credential_env)),
        timeout_seconds_(timeout_seconds) {
    if (endpoint_.empty()) throw ConfigError("chat backend needs an endpoint");
    if (model_.empty()) throw ConfigError("chat backend needs a model name");
  }

  std::string complete(const std::string& system_message,
                       const std::string& user_message) override {
    json body{{"model", model_},
              {"messages",
               json::array({json{{"role", "system"}, {"content", system_message}},
                            json{{"role", "user"}, {"content", user_message}}})},
              {"temperature", 0}};
    json response = detail::post_json(endpoint_, credential_env_, timeout_seconds_, body);
    if (!response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty()) {
      throw BackendError("chat response missing \"choices\"");
    }
    const auto& first = response["choices"][0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
      throw BackendError("chat response missing choices[0].message.content");
    }
    return first["message"]["content"].get<std::string>();
  }

 private:
  std::string endpoint_;
  std::string model_;
  std::string credential_env_;
  int timeout_seconds_;
};

inline std::unique_ptr<ChatCompleter> make_judge_backend(const AnnotatorConfig& cfg) {
  cfg.validate();
  if (cfg.kind != AnnotatorKind::external_llm) return nullptr;
  return std::make_unique<HttpChatCompleter>(cfg.endpoint, cfg.model, cfg.credential_env);
}

}  // namespace cclaims
