#pragma once
// Claim annotation: decides factual / nonfactual for each claim given the
// query, the ground-truth answer, and the retrieved documents.
//
// Three interchangeable backends:
//   oracle       — trusts the label already stored on the claim
//   overlap      — deterministic token-overlap heuristic (offline)
//   external_llm — chat-model judge returning a strict JSON verdict
//
// The judge's verdict contract is deliberately rigid: the assistant message
// must be exactly {"factual": true} or {"factual": false}. Mislabeled
// calibration claims silently corrupt the coverage guarantee, so anything
// else is an error, never a default.

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/parallel.hpp"
#include "cclaims/text.hpp"

namespace cclaims {

enum class AnnotatorKind { oracle, overlap, external_llm };

inline std::string annotator_kind_name(AnnotatorKind kind) {
  switch (kind) {
    case AnnotatorKind::oracle: return "oracle";
    case AnnotatorKind::overlap: return "overlap";
    case AnnotatorKind::external_llm: return "external_llm";
  }
  return "oracle";
}

inline AnnotatorKind annotator_kind_from_name(const std::string& name) {
  if (name == "oracle") return AnnotatorKind::oracle;
  if (name == "overlap") return AnnotatorKind::overlap;
  if (name == "external_llm") return AnnotatorKind::external_llm;
  throw ConfigError("unknown annotator \"" + name + "\" (expected oracle, overlap, or external_llm)");
}

// Judge prompt, version 1. Placeholders {query}, {ground_truth},
// {documents}, {claim} are substituted verbatim.
inline constexpr const char* kJudgePromptV1 =
    "You are verifying a single claim extracted from a generated answer.\n"
    "\n"
    "Question:\n{query}\n"
    "\n"
    "Ground-truth answer:\n{ground_truth}\n"
    "\n"
    "Retrieved documents:\n{documents}\n"
    "\n"
    "Claim to verify:\n{claim}\n"
    "\n"
    "Is the claim factual, i.e. supported by the ground-truth answer and the\n"
    "retrieved documents? Respond with exactly one JSON object and nothing\n"
    "else: {\"factual\": true} or {\"factual\": false}\n";

inline constexpr const char* kJudgeSystemMessage =
    "You are a strict fact-checking judge. Respond only with the requested "
    "JSON object; no prose, no code fences.";

struct AnnotatorConfig {
  AnnotatorKind kind = AnnotatorKind::oracle;
  double overlap_threshold = 0.6;  // overlap backend only, in (0,1]
  // external_llm backend only:
  std::string endpoint;
  std::string model;
  std::string credential_env = "CONFORMAL_CLAIMS_API_KEY";
  std::string prompt_template = kJudgePromptV1;

  void validate() const {
    if (kind == AnnotatorKind::overlap &&
        !(overlap_threshold > 0.0 && overlap_threshold <= 1.0)) {
      throw ConfigError("overlap_threshold must lie in (0,1], got " +
                        std::to_string(overlap_threshold));
    }
    if (kind == AnnotatorKind::external_llm) {
      if (endpoint.empty()) throw ConfigError("external_llm annotator needs an endpoint");
      if (model.empty()) throw ConfigError("external_llm annotator needs a model name");
      if (prompt_template.empty()) throw ConfigError("external_llm annotator needs a prompt template");
    }
  }
};

// Transport-level interface for a chat-completions judge; implemented over
// HTTP in http_backend.hpp and by in-process fakes in tests. Returns the
// assistant message content. Must be safe to call concurrently.
class ChatCompleter {
 public:
  virtual ~ChatCompleter() = default;
  virtual std::string complete(const std::string& system_message,
                               const std::string& user_message) = 0;
};

namespace detail {

inline std::string fill_placeholder(std::string text, const std::string& key,
                                    const std::string& value) {
  const std::string needle = "{" + key + "}";
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

inline std::string render_documents(const std::vector<DocumentItem>& documents) {
  std::string out;
  for (const auto& d : documents) {
    if (!out.empty()) out += '\n';
    out += "[" + d.id + "] " + d.text;
  }
  return out;
}

// The verdict must parse as a JSON object whose single key "factual" holds
// a boolean. Returns nullopt when it doesn't, so the caller can retry once.
inline std::optional<bool> parse_judge_verdict(const std::string& content) {
  json j = json::parse(content, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (j.size() != 1 || !j.contains("factual") || !j["factual"].is_boolean()) return std::nullopt;
  return j["factual"].get<bool>();
}

}  // namespace detail

inline std::string fill_judge_prompt(const std::string& prompt_template, const QueryItem& query,
                                     const std::string& ground_truth,
                                     const std::vector<DocumentItem>& documents,
                                     const ClaimRecord& claim) {
  std::string text = prompt_template;
  text = detail::fill_placeholder(std::move(text), "query", query.text);
  text = detail::fill_placeholder(std::move(text), "ground_truth", ground_truth);
  text = detail::fill_placeholder(std::move(text), "documents", detail::render_documents(documents));
  text = detail::fill_placeholder(std::move(text), "claim", claim.text);
  return text;
}

// Fraction of the claim's distinct tokens that also appear in the ground
// truth or any document. A claim with no tokens has nothing left to verify,
// so it is vacuously covered (ratio 1).
inline double overlap_ratio(const ClaimRecord& claim, const std::string& ground_truth,
                            const std::vector<DocumentItem>& documents) {
  std::unordered_set<std::string> claim_tokens = detail::token_set(claim.text);
  if (claim_tokens.empty()) return 1.0;
  std::unordered_set<std::string> reference = detail::token_set(ground_truth);
  for (const auto& d : documents) {
    for (auto& t : detail::tokenize(d.text)) reference.insert(std::move(t));
  }
  std::size_t hits = 0;
  for (const auto& t : claim_tokens) {
    if (reference.count(t)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(claim_tokens.size());
}

// Annotates one claim. `judge` is required only for the external_llm
// backend. Never returns Label::unlabeled.
inline Label annotate_claim(const ClaimRecord& claim, const QueryItem& query,
                            const std::string& ground_truth,
                            const std::vector<DocumentItem>& documents,
                            const AnnotatorConfig& cfg, ChatCompleter* judge = nullptr) {
  cfg.validate();
  switch (cfg.kind) {
    case AnnotatorKind::oracle: {
      if (claim.label == Label::unlabeled) {
        throw DataError("oracle annotator: claim \"" + claim.id + "\" has no stored label");
      }
      return claim.label;
    }
    case AnnotatorKind::overlap: {
      if (ground_truth.empty()) {
        throw DataError("overlap annotator: claim \"" + claim.id + "\" has no ground truth to compare against");
      }
      return overlap_ratio(claim, ground_truth, documents) >= cfg.overlap_threshold
                 ? Label::factual
                 : Label::nonfactual;
    }
    case AnnotatorKind::external_llm: {
      if (ground_truth.empty()) {
        throw DataError("external_llm annotator: claim \"" + claim.id + "\" has no ground truth for the judge");
      }
      if (judge == nullptr) {
        throw ConfigError("external_llm annotator: no judge backend configured");
      }
      const std::string user = fill_judge_prompt(cfg.prompt_template, query, ground_truth,
                                                 documents, claim);
      std::string last_problem;
      for (int attempt = 0; attempt < 2; ++attempt) {  // one full retry, then give up
        std::string content;
        try {
          content = judge->complete(kJudgeSystemMessage, user);
        } catch (const BackendError& e) {
          last_problem = e.what();
          continue;
        }
        if (auto verdict = detail::parse_judge_verdict(content)) {
          return *verdict ? Label::factual : Label::nonfactual;
        }
        last_problem = "unparseable verdict \"" + content + "\"";
      }
      throw BackendError("judge failed for claim \"" + claim.id + "\": " + last_problem);
    }
  }
  throw ConfigError("unreachable annotator kind");
}

// Returns a copy of the record with every claim's label set. Claim text,
// order, embeddings, and relevance are untouched. Claims are annotated
// concurrently up to `concurrency` in-flight calls; output order matches
// input order regardless.
inline AnswerRecord annotate_record(const AnswerRecord& record, const AnnotatorConfig& cfg,
                                    ChatCompleter* judge = nullptr, std::size_t concurrency = 1) {
  cfg.validate();
  AnswerRecord out = record;
  const std::string ground_truth = record.ground_truth.value_or("");
  detail::parallel_for(out.claims.size(), concurrency, [&](std::size_t i) {
    out.claims[i].label =
        annotate_claim(out.claims[i], out.query, ground_truth, out.documents, cfg, judge);
  });
  return out;
}

}  // namespace cclaims
