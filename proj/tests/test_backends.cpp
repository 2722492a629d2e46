#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cclaims/http_backend.hpp"

using namespace cclaims;
using Catch::Matchers::ContainsSubstring;

namespace {

// In-process HTTP server for exercising the clients against real sockets.
// Register handlers on `server`, then call start().
struct TestServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port) + path;
  }
};

// Value shared between the server handler thread and the test body.
template <typename T>
class Guarded {
 public:
  void set(T v) {
    std::lock_guard<std::mutex> lock(mutex_);
    value_ = std::move(v);
  }
  T get() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return value_;
  }

 private:
  mutable std::mutex mutex_;
  T value_{};
};

EmbeddingProviderConfig remote_config(const std::string& endpoint,
                                      const std::string& credential_env = "") {
  EmbeddingProviderConfig cfg;
  cfg.kind = EmbeddingProviderKind::external_http;
  cfg.endpoint = endpoint;
  cfg.model = "embedder-1";
  cfg.credential_env = credential_env;
  cfg.timeout_seconds = 5;
  return cfg;
}

// Environment variable that is set for this scope and removed after.
struct ScopedEnv {
  std::string name;
  ScopedEnv(const std::string& key, const std::string& value) : name(key) {
    ::setenv(key.c_str(), value.c_str(), 1);
  }
  ~ScopedEnv() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("endpoint URLs split into base and path", "[backends]") {
  auto url = detail::split_url("http://localhost:8000/v1/embeddings");
  REQUIRE(url.base == "http://localhost:8000");
  REQUIRE(url.path == "/v1/embeddings");

  auto bare = detail::split_url("http://localhost:8000");
  REQUIRE(bare.base == "http://localhost:8000");
  REQUIRE(bare.path == "/");

  REQUIRE_THROWS_AS(detail::split_url("localhost:8000/v1"), ConfigError);
  REQUIRE_THROWS_AS(detail::split_url("ftp://host/v1"), ConfigError);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  SECTION("https endpoints are refused when the build has no TLS") {
    REQUIRE_THROWS_WITH(detail::split_url("https://api.example.test/v1"),
                        ContainsSubstring("TLS"));
  }
#endif
}

TEST_CASE("remote embedding requests round-trip through HTTP", "[backends]") {
  TestServer ts;
  Guarded<std::string> seen_body;
  Guarded<std::string> seen_auth;
  ts.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body.set(req.body);
    seen_auth.set(req.has_header("Authorization") ? req.get_header_value("Authorization")
                                                  : "<absent>");
    // One 2-dim one-hot per input, emitted in REVERSE index order: clients
    // must reassemble by index, whatever the batch size.
    const std::size_t n = json::parse(req.body)["input"].size();
    json data = json::array();
    for (std::size_t i = n; i-- > 0;) {
      data.push_back(json{{"index", i},
                          {"embedding", {i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  ts.start();

  HttpEmbedder embedder(remote_config(ts.url("/v1/embeddings")));
  auto vectors = embedder.embed_batch({"first text", "second text"});
  REQUIRE(vectors.size() == 2);
  REQUIRE(vectors[0] == Embedding{1.0, 0.0});
  REQUIRE(vectors[1] == Embedding{0.0, 1.0});
  REQUIRE(embedder.name() == "external_http");

  SECTION("the request body carries the model and the input batch") {
    json body = json::parse(seen_body.get());
    REQUIRE(body["model"] == "embedder-1");
    REQUIRE(body["input"] == json::array({"first text", "second text"}));
  }
  SECTION("no credential variable, no Authorization header") {
    REQUIRE(seen_auth.get() == "<absent>");
  }
  SECTION("single-text embed goes through the same batch path") {
    REQUIRE(embedder.embed("first text") == Embedding{1.0, 0.0});
  }
  SECTION("an empty batch never touches the network") {
    HttpEmbedder unreachable(remote_config("http://127.0.0.1:1/nope"));
    REQUIRE(unreachable.embed_batch({}).empty());
  }
}

TEST_CASE("the bearer token is read from the configured environment variable",
          "[backends]") {
  TestServer ts;
  Guarded<std::string> seen_auth;
  ts.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth.set(req.get_header_value("Authorization"));
    res.set_content(
        json{{"data", json::array({json{{"index", 0}, {"embedding", {1.0}}}})}}.dump(),
        "application/json");
  });
  ts.start();

  ScopedEnv env("CCLAIMS_TEST_API_KEY", "sekret-token");
  HttpEmbedder embedder(remote_config(ts.url("/v1/embeddings"), "CCLAIMS_TEST_API_KEY"));
  embedder.embed("text");
  REQUIRE(seen_auth.get() == "Bearer sekret-token");
}

TEST_CASE("malformed embedding responses become backend errors", "[backends]") {
  TestServer ts;
  Guarded<std::string> mode;
  mode.set("ok");
  ts.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
    std::string m = mode.get();
    if (m == "http500") {
      res.status = 500;
      res.set_content("upstream exploded", "text/plain");
    } else if (m == "not_json") {
      res.set_content("this is not json", "text/plain");
    } else if (m == "missing_data") {
      res.set_content(json{{"results", json::array()}}.dump(), "application/json");
    } else if (m == "wrong_count") {
      res.set_content(json{{"data", json::array()}}.dump(), "application/json");
    } else if (m == "bad_index") {
      res.set_content(
          json{{"data", json::array({json{{"index", 7}, {"embedding", {1.0}}}})}}.dump(),
          "application/json");
    } else if (m == "dup_index") {
      json data = json::array({json{{"index", 0}, {"embedding", {1.0}}},
                               json{{"index", 0}, {"embedding", {2.0}}}});
      res.set_content(json{{"data", data}}.dump(), "application/json");
    } else if (m == "mixed_dims") {
      json data = json::array({json{{"index", 0}, {"embedding", {1.0}}},
                               json{{"index", 1}, {"embedding", {1.0, 2.0}}}});
      res.set_content(json{{"data", data}}.dump(), "application/json");
    } else if (m == "bad_values") {
      res.set_content(R"({"data":[{"index":0,"embedding":[1.0,"x"]}]})", "application/json");
    }
  });
  ts.start();
  HttpEmbedder embedder(remote_config(ts.url("/v1/embeddings")));

  mode.set("http500");
  REQUIRE_THROWS_WITH(embedder.embed("t"), ContainsSubstring("HTTP 500"));
  mode.set("not_json");
  REQUIRE_THROWS_WITH(embedder.embed("t"), ContainsSubstring("not valid JSON"));
  mode.set("missing_data");
  REQUIRE_THROWS_WITH(embedder.embed("t"), ContainsSubstring("data"));
  mode.set("wrong_count");
  REQUIRE_THROWS_WITH(embedder.embed_batch({"a", "b"}), ContainsSubstring("2 inputs"));
  mode.set("bad_index");
  REQUIRE_THROWS_WITH(embedder.embed("t"), ContainsSubstring("out of range"));
  mode.set("dup_index");
  REQUIRE_THROWS_WITH(embedder.embed_batch({"a", "b"}), ContainsSubstring("repeats index"));
  mode.set("mixed_dims");
  REQUIRE_THROWS_WITH(embedder.embed_batch({"a", "b"}), ContainsSubstring("dimensions"));
  mode.set("bad_values");
  REQUIRE_THROWS_AS(embedder.embed("t"), DataError);

  SECTION("an unreachable host is a backend error too") {
    HttpEmbedder unreachable(remote_config("http://127.0.0.1:1/nope"));
    REQUIRE_THROWS_AS(unreachable.embed("t"), BackendError);
  }
}

TEST_CASE("the embedder factory picks the backend from the config", "[backends]") {
  EmbeddingProviderConfig local;
  auto hashed = make_embedder(local);
  REQUIRE(hashed->name() == "hashed_tf");

  auto remote = make_embedder(remote_config("http://127.0.0.1:1/v1/embeddings"));
  REQUIRE(remote->name() == "external_http");

  SECTION("HttpEmbedder refuses a local-provider config") {
    REQUIRE_THROWS_AS(HttpEmbedder(local), ConfigError);
  }
}

TEST_CASE("chat completions extract the first message content", "[backends]") {
  TestServer ts;
  Guarded<std::string> seen_body;
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                   seen_body.set(req.body);
                   json reply{{"choices",
                               json::array({json{{"message", json{{"role", "assistant"},
                                                                  {"content", "the answer"}}}}})}};
                   res.set_content(reply.dump(), "application/json");
                 });
  ts.start();

  HttpChatCompleter chat(ts.url("/v1/chat/completions"), "chat-1", "");
  REQUIRE(chat.complete("be brief", "what is the answer?") == "the answer");

  json body = json::parse(seen_body.get());
  REQUIRE(body["model"] == "chat-1");
  REQUIRE(body["temperature"] == 0);
  REQUIRE(body["messages"].size() == 2);
  REQUIRE(body["messages"][0]["role"] == "system");
  REQUIRE(body["messages"][0]["content"] == "be brief");
  REQUIRE(body["messages"][1]["role"] == "user");
  REQUIRE(body["messages"][1]["content"] == "what is the answer?");
}

TEST_CASE("malformed chat responses become backend errors", "[backends]") {
  TestServer ts;
  Guarded<std::string> mode;
  mode.set("no_choices");
  ts.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (mode.get() == "no_choices") {
      res.set_content(json{{"choices", json::array()}}.dump(), "application/json");
    } else {
      res.set_content(
          json{{"choices", json::array({json{{"message", json::object()}}})}}.dump(),
          "application/json");
    }
  });
  ts.start();
  HttpChatCompleter chat(ts.url("/v1/chat/completions"), "chat-1", "");

  REQUIRE_THROWS_WITH(chat.complete("s", "u"), ContainsSubstring("choices"));
  mode.set("no_content");
  REQUIRE_THROWS_WITH(chat.complete("s", "u"), ContainsSubstring("content"));

  SECTION("constructor validation") {
    REQUIRE_THROWS_AS(HttpChatCompleter("", "m", ""), ConfigError);
    REQUIRE_THROWS_AS(HttpChatCompleter("http://h/x", "", ""), ConfigError);
  }
}

TEST_CASE("the judge factory builds a chat backend only for the LLM annotator",
          "[backends]") {
  AnnotatorConfig oracle_cfg;
  REQUIRE(make_judge_backend(oracle_cfg) == nullptr);

  AnnotatorConfig llm;
  llm.kind = AnnotatorKind::external_llm;
  llm.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  llm.model = "judge-1";
  REQUIRE(make_judge_backend(llm) != nullptr);
}

TEST_CASE("an HTTP judge annotates claims end to end", "[backends]") {
  TestServer ts;
  std::atomic<int> hits{0};
  ts.server.Post("/v1/chat/completions",
                 [&](const httplib::Request& req, httplib::Response& res) {
                   hits.fetch_add(1);
                   json body = json::parse(req.body);
                   std::string prompt = body["messages"][1]["content"].get<std::string>();
                   // The verdict keys off the claim text inside the prompt.
                   bool factual = prompt.find("paris is in france") != std::string::npos;
                   json reply{{"choices",
                               json::array({json{
                                   {"message",
                                    json{{"content", factual ? R"({"factual": true})"
                                                             : R"({"factual": false})"}}}}})}};
                   res.set_content(reply.dump(), "application/json");
                 });
  ts.start();

  AnnotatorConfig cfg;
  cfg.kind = AnnotatorKind::external_llm;
  cfg.endpoint = ts.url("/v1/chat/completions");
  cfg.model = "judge-1";
  auto judge = make_judge_backend(cfg);

  AnswerRecord record;
  record.query.id = "q1";
  record.query.text = "where is paris";
  record.ground_truth = "Paris is in France.";
  ClaimRecord good, bad;
  good.id = "c1";
  good.text = "paris is in france";
  bad.id = "c2";
  bad.text = "paris is in spain";
  record.claims = {good, bad};

  AnswerRecord annotated = annotate_record(record, cfg, judge.get(), 2);
  REQUIRE(annotated.claims[0].label == Label::factual);
  REQUIRE(annotated.claims[1].label == Label::nonfactual);
  REQUIRE(hits.load() == 2);
}
