#pragma once
// Embedding backends and relevance scoring.
//
// Relevance of a claim c_k given query x and documents {d_j}:
//   s_kj = cos(x, d_j) * cos(c_k, d_j)
//   r_k  = max over j of s_kj, floored at 0 and capped at 1.
// A claim unsupported by every document (or with no documents at all)
// scores exactly 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/text.hpp"

namespace cclaims {

// Cosine similarity; either vector having zero norm yields 0. The result
// is clamped to [-1, 1] to absorb floating-point drift.
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw DataError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double value = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(value, -1.0, 1.0);
}

enum class EmbeddingProviderKind { hashed_tf, external_http };

inline std::string provider_kind_name(EmbeddingProviderKind kind) {
  return kind == EmbeddingProviderKind::hashed_tf ? "hashed_tf" : "external_http";
}

inline EmbeddingProviderKind provider_kind_from_name(const std::string& name) {
  if (name == "hashed_tf") return EmbeddingProviderKind::hashed_tf;
  if (name == "external_http") return EmbeddingProviderKind::external_http;
  throw ConfigError("unknown embedding provider \"" + name + "\" (expected hashed_tf or external_http)");
}

struct EmbeddingProviderConfig {
  EmbeddingProviderKind kind = EmbeddingProviderKind::hashed_tf;
  std::size_t dim = 256;  // hashed_tf only
  // external_http only:
  std::string endpoint;
  std::string model;
  std::string credential_env = "CONFORMAL_CLAIMS_API_KEY";
  int timeout_seconds = 30;
  std::size_t max_in_flight = 4;

  void validate() const {
    if (kind == EmbeddingProviderKind::hashed_tf) {
      if (dim < 16) throw ConfigError("hashed_tf dimension must be at least 16");
    } else {
      if (endpoint.empty()) throw ConfigError("external_http embedding provider needs an endpoint");
      if (model.empty()) throw ConfigError("external_http embedding provider needs a model name");
    }
  }
};

// Common interface for anything that turns text into vectors. Batch form
// lets remote backends amortize round trips; the base implementation just
// loops.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(const std::string& text) = 0;
  virtual std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
  virtual std::string name() const = 0;
};

// Deterministic local embedder: token counts hashed into a fixed number of
// buckets (FNV-1a 64-bit), then L2-normalized. Texts with no tokens map to
// the zero vector.
class HashedTfEmbedder : public Embedder {
 public:
  explicit HashedTfEmbedder(std::size_t dim = 256) : dim_(dim) {
    if (dim_ < 16) throw ConfigError("hashed_tf dimension must be at least 16");
  }

  Embedding embed(const std::string& text) override {
    Embedding v(dim_, 0.0);
    for (const auto& token : detail::tokenize(text)) {
      v[fnv1a64(token) % dim_] += 1.0;
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq > 0.0) {
      double inv = 1.0 / std::sqrt(norm_sq);
      for (double& x : v) x *= inv;
    }
    return v;
  }

  std::string name() const override { return "hashed_tf"; }
  std::size_t dim() const { return dim_; }

  static std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
      h ^= static_cast<std::uint64_t>(c);
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  std::size_t dim_;
};

// Serves embeddings already attached to records or resolved from a store;
// refuses to invent vectors for unseen text.
class PrecomputedEmbedder : public Embedder {
 public:
  explicit PrecomputedEmbedder(EmbeddingStore store) : store_(std::move(store)) {}

  Embedding embed(const std::string& text) override {
    auto it = store_.by_id.find(text);
    if (it == store_.by_id.end()) {
      throw DataError("no precomputed embedding for id \"" + text + "\"");
    }
    return it->second;
  }

  std::string name() const override { return "precomputed"; }

 private:
  EmbeddingStore store_;
};

// Fills in any missing embeddings on a record in place. Items that already
// carry a vector are left untouched; the rest are embedded in one batch
// (query first, then documents, then claims, in record order).
inline void ensure_embeddings(AnswerRecord& record, Embedder& embedder) {
  std::vector<std::string> texts;
  std::vector<std::optional<Embedding>*> slots;
  if (!record.query.embedding) {
    texts.push_back(record.query.text);
    slots.push_back(&record.query.embedding);
  }
  for (auto& d : record.documents) {
    if (!d.embedding) {
      texts.push_back(d.text);
      slots.push_back(&d.embedding);
    }
  }
  for (auto& c : record.claims) {
    if (!c.embedding) {
      texts.push_back(c.text);
      slots.push_back(&c.embedding);
    }
  }
  if (texts.empty()) return;
  std::vector<Embedding> vectors = embedder.embed_batch(texts);
  if (vectors.size() != texts.size()) {
    throw BackendError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                       std::to_string(texts.size()) + " inputs");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = std::move(vectors[i]);
}

// The min(k, |corpus|) documents most similar to the query, best first.
// Ties break toward the lexicographically smaller document id so results
// never depend on input order. An empty corpus yields an empty list.
inline std::vector<DocumentItem> retrieve_top_k(const QueryItem& query,
                                                const std::vector<DocumentItem>& corpus,
                                                std::size_t k) {
  if (k == 0) throw DataError("retrieval needs k >= 1");
  if (!query.embedding) throw DataError("query \"" + query.id + "\" has no embedding");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].embedding) {
      throw DataError("document \"" + corpus[i].id + "\" has no embedding");
    }
    scored.emplace_back(cosine_similarity(*query.embedding, *corpus[i].embedding), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return corpus[a.second].id < corpus[b.second].id;
  });
  if (k < scored.size()) scored.resize(k);
  std::vector<DocumentItem> out;
  out.reserve(scored.size());
  for (const auto& [score, idx] : scored) out.push_back(corpus[idx]);
  return out;
}

// Per-claim scoring detail: the product score against every document, and
// the max-floored-at-zero relevance derived from them.
struct RelevanceBreakdown {
  std::string claim_id;
  std::vector<std::pair<std::string, double>> per_document;  // (document id, s_kj)
  double relevance = 0.0;
};

// Scores every claim on the record and writes the result into
// claim.relevance. All embeddings must be present (see ensure_embeddings).
inline std::vector<RelevanceBreakdown> score_claims(AnswerRecord& record) {
  if (!record.query.embedding) {
    throw DataError("query \"" + record.query.id + "\" has no embedding");
  }
  const Embedding& qv = *record.query.embedding;

  std::vector<double> query_doc(record.documents.size(), 0.0);
  for (std::size_t j = 0; j < record.documents.size(); ++j) {
    if (!record.documents[j].embedding) {
      throw DataError("document \"" + record.documents[j].id + "\" has no embedding");
    }
    query_doc[j] = cosine_similarity(qv, *record.documents[j].embedding);
  }

  std::vector<RelevanceBreakdown> breakdowns;
  breakdowns.reserve(record.claims.size());
  for (auto& claim : record.claims) {
    if (!claim.embedding) {
      throw DataError("claim \"" + claim.id + "\" has no embedding");
    }
    RelevanceBreakdown bd;
    bd.claim_id = claim.id;
    bd.per_document.reserve(record.documents.size());
    double best = 0.0;  // the floor: no document support scores 0
    for (std::size_t j = 0; j < record.documents.size(); ++j) {
      double cd = cosine_similarity(*claim.embedding, *record.documents[j].embedding);
      double s = query_doc[j] * cd;
      bd.per_document.emplace_back(record.documents[j].id, s);
      best = std::max(best, s);
    }
    bd.relevance = std::min(best, 1.0);
    claim.relevance = bd.relevance;
    breakdowns.push_back(std::move(bd));
  }
  return breakdowns;
}

// Convenience overload: fills in any missing embeddings first, then scores.
inline std::vector<RelevanceBreakdown> score_claims(AnswerRecord& record, Embedder& embedder) {
  ensure_embeddings(record, embedder);
  return score_claims(record);
}

}  // namespace cclaims
