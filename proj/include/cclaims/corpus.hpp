#pragma once
// Data model and JSONL ingestion for queries, documents, claims, labels,
// group assignments, and embeddings.
//
// Dataset exchange format is JSONL, one answer record per line:
//   {"query": {"id", "text", "group"?, "embedding"?},
//    "documents": [{"id", "text", "embedding"?}],
//    "claims": [{"id", "text", "embedding"?, "label"?, "relevance"?}],
//    "raw_answer"?, "ground_truth"?}
// An optional embedding store (JSONL of {"id", "embedding"}) resolves
// embeddings by item id; inline embeddings take precedence.

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cclaims/errors.hpp"

namespace cclaims {

using json = nlohmann::json;
using Embedding = std::vector<double>;

enum class Label { factual, nonfactual, unlabeled };
enum class Split { calibration, test };

struct QueryItem {
  std::string id;
  std::string text;
  std::optional<std::string> group;
  std::optional<Embedding> embedding;
};

struct DocumentItem {
  std::string id;
  std::string text;
  std::optional<Embedding> embedding;
};

struct ClaimRecord {
  std::string id;
  std::string text;
  std::optional<Embedding> embedding;
  std::optional<double> relevance;  // in [0,1] once scored
  Label label = Label::unlabeled;
};

// One query with its retrieved documents and decomposed claims; the unit
// of calibration and inference.
struct AnswerRecord {
  QueryItem query;
  std::vector<DocumentItem> documents;
  std::vector<ClaimRecord> claims;
  std::optional<std::string> raw_answer;
  std::optional<std::string> ground_truth;
};

struct EmbeddingStore {
  std::unordered_map<std::string, Embedding> by_id;
};

inline std::string label_name(Label label) {
  switch (label) {
    case Label::factual: return "factual";
    case Label::nonfactual: return "nonfactual";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline Label label_from_name(const std::string& name) {
  if (name == "factual") return Label::factual;
  if (name == "nonfactual") return Label::nonfactual;
  if (name == "unlabeled") return Label::unlabeled;
  throw DataError("unknown label \"" + name + "\"");
}

namespace detail {

inline Embedding embedding_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + ": embedding must be an array");
  Embedding values;
  values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(where + ": embedding values must be numbers");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw DataError(where + ": embedding contains a non-finite value");
    values.push_back(x);
  }
  return values;
}

inline std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw DataError(where + ": missing or non-string \"" + key + "\"");
  }
  return j[key].get<std::string>();
}

inline void resolve_embedding(std::optional<Embedding>& slot, const std::string& id,
                              const EmbeddingStore* store) {
  if (slot || store == nullptr) return;
  auto it = store->by_id.find(id);
  if (it != store->by_id.end()) slot = it->second;
}

}  // namespace detail

inline AnswerRecord record_from_json(const json& j, Split split,
                                     const EmbeddingStore* store = nullptr,
                                     const std::string& where = "record") {
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  AnswerRecord record;

  if (!j.contains("query") || !j["query"].is_object()) {
    throw DataError(where + ": missing \"query\" object");
  }
  const json& q = j["query"];
  record.query.id = detail::require_string(q, "id", where + ".query");
  record.query.text = detail::require_string(q, "text", where + ".query");
  if (record.query.id.empty()) throw DataError(where + ".query: empty id");
  if (record.query.text.empty()) throw DataError(where + ".query: empty text");
  if (q.contains("group")) {
    if (!q["group"].is_string()) throw DataError(where + ".query: \"group\" must be a string");
    record.query.group = q["group"].get<std::string>();
  }
  if (q.contains("embedding")) {
    record.query.embedding = detail::embedding_from_json(q["embedding"], where + ".query");
  }
  detail::resolve_embedding(record.query.embedding, record.query.id, store);

  std::set<std::string> doc_ids;
  if (j.contains("documents")) {
    if (!j["documents"].is_array()) throw DataError(where + ": \"documents\" must be an array");
    for (const auto& d : j["documents"]) {
      DocumentItem doc;
      doc.id = detail::require_string(d, "id", where + ".documents");
      doc.text = detail::require_string(d, "text", where + ".documents");
      if (doc.id.empty()) throw DataError(where + ".documents: empty id");
      if (doc.text.empty()) throw DataError(where + ".documents: empty text in document \"" + doc.id + "\"");
      if (!doc_ids.insert(doc.id).second) {
        throw DataError(where + ": duplicate document id \"" + doc.id + "\"");
      }
      if (d.contains("embedding")) {
        doc.embedding = detail::embedding_from_json(d["embedding"], where + ".documents." + doc.id);
      }
      detail::resolve_embedding(doc.embedding, doc.id, store);
      record.documents.push_back(std::move(doc));
    }
  }

  std::set<std::string> claim_ids;
  if (j.contains("claims")) {
    if (!j["claims"].is_array()) throw DataError(where + ": \"claims\" must be an array");
    for (const auto& c : j["claims"]) {
      ClaimRecord claim;
      claim.id = detail::require_string(c, "id", where + ".claims");
      claim.text = detail::require_string(c, "text", where + ".claims");
      if (claim.id.empty()) throw DataError(where + ".claims: empty id");
      if (claim.text.empty()) throw DataError(where + ".claims: empty text in claim \"" + claim.id + "\"");
      if (!claim_ids.insert(claim.id).second) {
        throw DataError(where + ": duplicate claim id \"" + claim.id + "\"");
      }
      if (c.contains("embedding")) {
        claim.embedding = detail::embedding_from_json(c["embedding"], where + ".claims." + claim.id);
      }
      detail::resolve_embedding(claim.embedding, claim.id, store);
      if (c.contains("label")) {
        if (!c["label"].is_string()) throw DataError(where + ".claims: \"label\" must be a string");
        claim.label = label_from_name(c["label"].get<std::string>());
      }
      if (c.contains("relevance")) {
        if (!c["relevance"].is_number()) throw DataError(where + ".claims: \"relevance\" must be a number");
        double r = c["relevance"].get<double>();
        if (!(r >= 0.0 && r <= 1.0)) {
          throw DataError(where + ".claims: relevance " + std::to_string(r) +
                          " outside [0,1] in claim \"" + claim.id + "\"");
        }
        claim.relevance = r;
      }
      if (split == Split::calibration && claim.label == Label::unlabeled) {
        throw DataError(where + ": calibration claim \"" + claim.id + "\" is unlabeled");
      }
      record.claims.push_back(std::move(claim));
    }
  }

  if (j.contains("raw_answer")) {
    if (!j["raw_answer"].is_string()) throw DataError(where + ": \"raw_answer\" must be a string");
    record.raw_answer = j["raw_answer"].get<std::string>();
  }
  if (j.contains("ground_truth")) {
    if (!j["ground_truth"].is_string()) throw DataError(where + ": \"ground_truth\" must be a string");
    record.ground_truth = j["ground_truth"].get<std::string>();
  }
  return record;
}

inline json record_to_json(const AnswerRecord& record) {
  json q;
  q["id"] = record.query.id;
  q["text"] = record.query.text;
  if (record.query.group) q["group"] = *record.query.group;
  if (record.query.embedding) q["embedding"] = *record.query.embedding;

  json docs = json::array();
  for (const auto& d : record.documents) {
    json doc;
    doc["id"] = d.id;
    doc["text"] = d.text;
    if (d.embedding) doc["embedding"] = *d.embedding;
    docs.push_back(std::move(doc));
  }

  json claims = json::array();
  for (const auto& c : record.claims) {
    json claim;
    claim["id"] = c.id;
    claim["text"] = c.text;
    if (c.embedding) claim["embedding"] = *c.embedding;
    if (c.relevance) claim["relevance"] = *c.relevance;
    if (c.label != Label::unlabeled) claim["label"] = label_name(c.label);
    claims.push_back(std::move(claim));
  }

  json out;
  out["query"] = std::move(q);
  out["documents"] = std::move(docs);
  out["claims"] = std::move(claims);
  if (record.raw_answer) out["raw_answer"] = *record.raw_answer;
  if (record.ground_truth) out["ground_truth"] = *record.ground_truth;
  return out;
}

// Loads a JSONL dataset. Records come back in file order; every type
// invariant is validated here so downstream code can assume clean values.
// Unlabeled claims are rejected for the calibration split.
inline std::vector<AnswerRecord> load_dataset(const std::string& path, Split split,
                                              const EmbeddingStore* store = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset \"" + path + "\"");

  std::vector<AnswerRecord> records;
  std::set<std::string> query_ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_number) + ": malformed JSON: " + e.what());
    }
    AnswerRecord record =
        record_from_json(j, split, store, path + ":" + std::to_string(line_number));
    if (!query_ids.insert(record.query.id).second) {
      throw DataError(path + ":" + std::to_string(line_number) + ": duplicate query id \"" +
                      record.query.id + "\"");
    }
    records.push_back(std::move(record));
  }
  return records;
}

inline void save_dataset(const std::string& path, const std::vector<AnswerRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset \"" + path + "\"");
  for (const auto& record : records) out << record_to_json(record).dump() << '\n';
}

inline EmbeddingStore load_embedding_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding store \"" + path + "\"");
  EmbeddingStore store;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_number) + ": malformed JSON: " + e.what());
    }
    std::string where = path + ":" + std::to_string(line_number);
    std::string id = detail::require_string(j, "id", where);
    if (!j.contains("embedding")) throw DataError(where + ": missing \"embedding\"");
    store.by_id[id] = detail::embedding_from_json(j["embedding"], where);
  }
  return store;
}

// Disjoint partition keyed by the query's group label; within-group order
// matches input order. Every record must carry a group.
inline std::map<std::string, std::vector<AnswerRecord>> partition_by_group(
    const std::vector<AnswerRecord>& records) {
  std::map<std::string, std::vector<AnswerRecord>> parts;
  for (const auto& record : records) {
    if (!record.query.group || record.query.group->empty()) {
      throw DataError("record \"" + record.query.id + "\" has no group label");
    }
    parts[*record.query.group].push_back(record);
  }
  return parts;
}

}  // namespace cclaims
