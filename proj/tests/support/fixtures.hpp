#pragma once
// Random fixture builders shared by the property tests.

#include <string>
#include <vector>

#include "cclaims/corpus.hpp"
#include "cclaims/random.hpp"

namespace fixtures {

using cclaims::detail::Rng;

inline cclaims::ClaimRecord labeled_claim(const std::string& id, double relevance,
                                          cclaims::Label label) {
  cclaims::ClaimRecord claim;
  claim.id = id;
  claim.text = "claim " + id;
  claim.relevance = relevance;
  claim.label = label;
  return claim;
}

// A record with random relevances in [0,1] and random factual/nonfactual
// labels — the raw material for score/filter property tests.
inline cclaims::AnswerRecord random_labeled_record(Rng& rng, const std::string& query_id,
                                                   std::size_t max_claims = 8) {
  cclaims::AnswerRecord record;
  record.query.id = query_id;
  record.query.text = "query " + query_id;
  std::size_t n = rng.uniform_int(0, max_claims);
  for (std::size_t k = 0; k < n; ++k) {
    record.claims.push_back(labeled_claim(
        "c" + std::to_string(k + 1), rng.uniform(),
        rng.bernoulli(0.6) ? cclaims::Label::factual : cclaims::Label::nonfactual));
  }
  return record;
}

// A record with random embeddings on every item (dimension `dim`, values in
// [-1, 1]), for exercising the relevance scorer against the direct oracle.
inline cclaims::AnswerRecord random_embedded_record(Rng& rng, const std::string& query_id,
                                                    std::size_t dim = 24,
                                                    std::size_t max_docs = 5,
                                                    std::size_t max_claims = 6) {
  auto random_vec = [&] {
    cclaims::Embedding v(dim);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  cclaims::AnswerRecord record;
  record.query.id = query_id;
  record.query.text = "query " + query_id;
  record.query.embedding = random_vec();
  std::size_t docs = rng.uniform_int(0, max_docs);
  for (std::size_t j = 0; j < docs; ++j) {
    cclaims::DocumentItem doc;
    doc.id = "d" + std::to_string(j + 1);
    doc.text = "document " + doc.id;
    doc.embedding = random_vec();
    record.documents.push_back(std::move(doc));
  }
  std::size_t claims = rng.uniform_int(1, max_claims);
  for (std::size_t k = 0; k < claims; ++k) {
    cclaims::ClaimRecord claim;
    claim.id = "c" + std::to_string(k + 1);
    claim.text = "claim " + claim.id;
    claim.embedding = random_vec();
    record.claims.push_back(std::move(claim));
  }
  return record;
}

}  // namespace fixtures
