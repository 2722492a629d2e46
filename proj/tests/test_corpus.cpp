#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "cclaims/corpus.hpp"

using namespace cclaims;

namespace {

json minimal_record_json() {
  return json{
      {"query", {{"id", "q1"}, {"text", "what is the capital of france"}}},
      {"documents", json::array({json{{"id", "d1"}, {"text", "paris is the capital of france"}}})},
      {"claims", json::array({json{{"id", "c1"},
                                   {"text", "paris is the capital"},
                                   {"label", "factual"}}})},
  };
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& contents) : path(name) {
    std::ofstream out(path, std::ios::binary);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("records parse from JSON and serialize back losslessly", "[corpus]") {
  json j = minimal_record_json();
  j["query"]["group"] = "geo";
  j["ground_truth"] = "Paris is the capital of France.";
  j["raw_answer"] = "Paris is the capital. It has two million people.";
  j["claims"][0]["relevance"] = 0.75;
  j["claims"][0]["embedding"] = json::array({0.5, 0.5});

  AnswerRecord record = record_from_json(j, Split::calibration);
  REQUIRE(record.query.id == "q1");
  REQUIRE(record.query.group.has_value());
  REQUIRE(*record.query.group == "geo");
  REQUIRE(record.documents.size() == 1);
  REQUIRE(record.claims.size() == 1);
  REQUIRE(record.claims[0].label == Label::factual);
  REQUIRE(record.claims[0].relevance.has_value());
  REQUIRE(*record.claims[0].relevance == 0.75);
  REQUIRE(record.claims[0].embedding.has_value());
  REQUIRE(record.ground_truth.has_value());
  REQUIRE(record.raw_answer.has_value());

  json back = record_to_json(record);
  REQUIRE(back == j);
}

TEST_CASE("optional fields stay absent through a round-trip", "[corpus]") {
  json j = minimal_record_json();
  j["claims"][0].erase("label");

  AnswerRecord record = record_from_json(j, Split::test);
  REQUIRE(record.claims[0].label == Label::unlabeled);
  REQUIRE_FALSE(record.query.group.has_value());
  REQUIRE_FALSE(record.ground_truth.has_value());

  json back = record_to_json(record);
  REQUIRE_FALSE(back.contains("ground_truth"));
  REQUIRE_FALSE(back.contains("raw_answer"));
  REQUIRE_FALSE(back["query"].contains("group"));
  REQUIRE_FALSE(back["claims"][0].contains("label"));
  REQUIRE_FALSE(back["claims"][0].contains("relevance"));
}

TEST_CASE("record parsing rejects malformed structures", "[corpus]") {
  SECTION("calibration records must label every claim") {
    json j = minimal_record_json();
    j["claims"][0].erase("label");
    REQUIRE_THROWS_WITH(record_from_json(j, Split::calibration),
                        Catch::Matchers::ContainsSubstring("c1"));
    REQUIRE_NOTHROW(record_from_json(j, Split::test));
  }
  SECTION("unknown label strings") {
    json j = minimal_record_json();
    j["claims"][0]["label"] = "sort_of_true";
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
  }
  SECTION("relevance outside [0,1]") {
    json j = minimal_record_json();
    j["claims"][0]["relevance"] = 1.5;
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
    j["claims"][0]["relevance"] = -0.1;
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
  }
  SECTION("non-finite or non-numeric embedding entries") {
    json j = minimal_record_json();
    j["claims"][0]["embedding"] = json::array({0.5, "oops"});
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
  }
  SECTION("duplicate document ids") {
    json j = minimal_record_json();
    j["documents"].push_back(json{{"id", "d1"}, {"text", "another"}});
    REQUIRE_THROWS_WITH(record_from_json(j, Split::calibration),
                        Catch::Matchers::ContainsSubstring("d1"));
  }
  SECTION("duplicate claim ids") {
    json j = minimal_record_json();
    j["claims"].push_back(json{{"id", "c1"}, {"text", "again"}, {"label", "factual"}});
    REQUIRE_THROWS_WITH(record_from_json(j, Split::calibration),
                        Catch::Matchers::ContainsSubstring("c1"));
  }
  SECTION("missing query id or empty text") {
    json j = minimal_record_json();
    j["query"].erase("id");
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
    j = minimal_record_json();
    j["query"]["text"] = "";
    REQUIRE_THROWS_AS(record_from_json(j, Split::calibration), DataError);
  }
  SECTION("non-object input") {
    REQUIRE_THROWS_AS(record_from_json(json::array(), Split::test), DataError);
  }
}

TEST_CASE("datasets load line by line with positional error messages", "[corpus]") {
  SECTION("happy path skips blank lines") {
    std::string contents = minimal_record_json().dump() + "\n\n";
    json second = minimal_record_json();
    second["query"]["id"] = "q2";
    contents += second.dump() + "\n";
    TempFile file("corpus_load_ok.jsonl", contents);
    std::vector<AnswerRecord> records = load_dataset(file.path, Split::calibration);
    REQUIRE(records.size() == 2);
    REQUIRE(records[0].query.id == "q1");
    REQUIRE(records[1].query.id == "q2");
  }
  SECTION("malformed JSON names the file and line") {
    TempFile file("corpus_load_bad.jsonl", minimal_record_json().dump() + "\n{not json}\n");
    REQUIRE_THROWS_WITH(load_dataset(file.path, Split::calibration),
                        Catch::Matchers::ContainsSubstring("corpus_load_bad.jsonl:2"));
  }
  SECTION("a field error names the offending line too") {
    json bad = minimal_record_json();
    bad["claims"][0]["relevance"] = 2.0;
    TempFile file("corpus_load_field.jsonl", minimal_record_json().dump() + "\n" + bad.dump() + "\n");
    REQUIRE_THROWS_WITH(load_dataset(file.path, Split::calibration),
                        Catch::Matchers::ContainsSubstring("corpus_load_field.jsonl:2"));
  }
  SECTION("duplicate query ids across lines are rejected") {
    std::string line = minimal_record_json().dump() + "\n";
    TempFile file("corpus_load_dup.jsonl", line + line);
    REQUIRE_THROWS_WITH(load_dataset(file.path, Split::calibration),
                        Catch::Matchers::ContainsSubstring("q1"));
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_dataset("no_such_file.jsonl", Split::test), DataError);
  }
}

TEST_CASE("save_dataset writes what load_dataset reads", "[corpus]") {
  json j = minimal_record_json();
  j["query"]["group"] = "geo";
  std::vector<AnswerRecord> records{record_from_json(j, Split::calibration)};
  std::string path = "corpus_roundtrip.jsonl";
  save_dataset(path, records);
  std::vector<AnswerRecord> back = load_dataset(path, Split::calibration);
  std::remove(path.c_str());
  REQUIRE(back.size() == 1);
  REQUIRE(record_to_json(back[0]) == j);
}

TEST_CASE("embedding stores map ids to vectors", "[corpus]") {
  std::string contents = json{{"id", "d1"}, {"embedding", {1.0, 0.0}}}.dump() + "\n" +
                         json{{"id", "c1"}, {"embedding", {0.0, 1.0}}}.dump() + "\n";
  TempFile file("store_ok.jsonl", contents);
  EmbeddingStore store = load_embedding_store(file.path);
  REQUIRE(store.by_id.size() == 2);
  REQUIRE(store.by_id.at("d1") == Embedding{1.0, 0.0});

  SECTION("loading a dataset against the store resolves missing embeddings") {
    json j = minimal_record_json();
    AnswerRecord record = record_from_json(j, Split::calibration, &store);
    REQUIRE(record.documents[0].embedding.has_value());
    REQUIRE(*record.documents[0].embedding == Embedding{1.0, 0.0});
    REQUIRE(record.claims[0].embedding.has_value());
    REQUIRE(*record.claims[0].embedding == Embedding{0.0, 1.0});
    REQUIRE_FALSE(record.query.embedding.has_value());  // q1 is not in the store
  }
  SECTION("inline embeddings take precedence over the store") {
    json j = minimal_record_json();
    j["documents"][0]["embedding"] = json::array({5.0, 5.0});
    AnswerRecord record = record_from_json(j, Split::calibration, &store);
    REQUIRE(*record.documents[0].embedding == Embedding{5.0, 5.0});
  }
}

TEST_CASE("resolve_embedding fills only empty slots", "[corpus]") {
  EmbeddingStore store;
  store.by_id["x"] = {9.0, 9.0};
  std::optional<Embedding> slot;
  detail::resolve_embedding(slot, "x", &store);
  REQUIRE(slot.has_value());
  REQUIRE(*slot == Embedding{9.0, 9.0});

  slot = Embedding{1.0};
  detail::resolve_embedding(slot, "x", &store);
  REQUIRE(*slot == Embedding{1.0});

  std::optional<Embedding> missing;
  detail::resolve_embedding(missing, "unknown", &store);
  REQUIRE_FALSE(missing.has_value());
  detail::resolve_embedding(missing, "x", nullptr);
  REQUIRE_FALSE(missing.has_value());
}

TEST_CASE("partition_by_group buckets records and rejects missing groups", "[corpus]") {
  auto make = [](const std::string& id, std::optional<std::string> group) {
    AnswerRecord r;
    r.query.id = id;
    r.query.text = "text";
    r.query.group = std::move(group);
    return r;
  };
  std::vector<AnswerRecord> records{make("a", "g1"), make("b", "g2"), make("c", "g1")};
  auto buckets = partition_by_group(records);
  REQUIRE(buckets.size() == 2);
  REQUIRE(buckets.at("g1").size() == 2);
  REQUIRE(buckets.at("g2").size() == 1);
  REQUIRE(buckets.at("g1")[0].query.id == "a");
  REQUIRE(buckets.at("g1")[1].query.id == "c");

  records.push_back(make("d", std::nullopt));
  REQUIRE_THROWS_WITH(partition_by_group(records), Catch::Matchers::ContainsSubstring("d"));
  records.back().query.group = "";
  REQUIRE_THROWS_AS(partition_by_group(records), DataError);
}

TEST_CASE("label names round-trip", "[corpus]") {
  REQUIRE(label_from_name(label_name(Label::factual)) == Label::factual);
  REQUIRE(label_from_name(label_name(Label::nonfactual)) == Label::nonfactual);
  REQUIRE_THROWS_AS(label_from_name("maybe"), DataError);
}
