#pragma once
// End-to-end orchestration: decompose answers into claims, score claim
// relevance, annotate, calibrate, filter, merge retained claims back into
// an answer, and evaluate filtered outputs against labeled data.
//
// All orchestration here is deterministic given its inputs when the local
// backends (hashed_tf embeddings, oracle/overlap annotators, sentence_split
// decomposition, concatenate merging) are used.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cclaims/annotate.hpp"
#include "cclaims/conformal.hpp"
#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/parallel.hpp"
#include "cclaims/similarity.hpp"

namespace cclaims {

enum class DecomposeBackend { sentence_split, external_llm };
enum class MergeBackend { concatenate, external_llm };

inline DecomposeBackend decompose_backend_from_name(const std::string& name) {
  if (name == "sentence_split") return DecomposeBackend::sentence_split;
  if (name == "external_llm") return DecomposeBackend::external_llm;
  throw ConfigError("unknown decompose backend \"" + name + "\" (expected sentence_split or external_llm)");
}

inline MergeBackend merge_backend_from_name(const std::string& name) {
  if (name == "concatenate") return MergeBackend::concatenate;
  if (name == "external_llm") return MergeBackend::external_llm;
  throw ConfigError("unknown merge backend \"" + name + "\" (expected concatenate or external_llm)");
}

namespace detail {

inline void trim_in_place(std::string& s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
}

// Naive sentence boundary: a run of . ! ? followed by whitespace or end of
// text. Decimal points and mid-token punctuation don't split; abbreviations
// do (documented limitation of the offline backend).
inline std::vector<std::string> sentence_split(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
      while (i + 1 < text.size() &&
             (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) {
        current += text[++i];
      }
      if (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        trim_in_place(current);
        if (!current.empty()) sentences.push_back(current);
        current.clear();
      }
    }
  }
  trim_in_place(current);
  if (!current.empty()) sentences.push_back(current);
  return sentences;
}

inline constexpr const char* kDecomposeSystemMessage =
    "You split a generated answer into atomic factual claims. Respond only "
    "with a JSON array of claim strings; no prose, no code fences.";

inline constexpr const char* kMergeSystemMessage =
    "You merge a list of factual claims into one coherent answer that "
    "preserves every claim's content. Respond only with the merged answer "
    "text.";

}  // namespace detail

// Splits an answer into claim records with sequential ids c1, c2, ...
// The external backend must return a JSON array of claim strings.
inline std::vector<ClaimRecord> decompose(const std::string& answer_text,
                                          DecomposeBackend backend,
                                          ChatCompleter* rewriter = nullptr) {
  std::vector<std::string> texts;
  if (backend == DecomposeBackend::sentence_split) {
    texts = detail::sentence_split(answer_text);
  } else {
    if (rewriter == nullptr) {
      throw ConfigError("external_llm decomposition: no chat backend configured");
    }
    if (!answer_text.empty()) {
      std::string content = rewriter->complete(
          detail::kDecomposeSystemMessage,
          "Answer to decompose:\n" + answer_text + "\n\nJSON array of claims:");
      json parsed = json::parse(content, nullptr, /*allow_exceptions=*/false);
      if (parsed.is_discarded() || !parsed.is_array()) {
        throw BackendError("decomposition backend did not return a JSON array");
      }
      for (const auto& item : parsed) {
        if (!item.is_string()) {
          throw BackendError("decomposition backend returned a non-string claim");
        }
        std::string t = item.get<std::string>();
        detail::trim_in_place(t);
        if (!t.empty()) texts.push_back(std::move(t));
      }
    }
  }
  std::vector<ClaimRecord> claims;
  claims.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ClaimRecord c;
    c.id = "c" + std::to_string(i + 1);
    c.text = std::move(texts[i]);
    claims.push_back(std::move(c));
  }
  return claims;
}

// Joins claims back into an answer. concatenate joins texts with single
// spaces in order; the external backend asks for a fluent rewrite. An empty
// claim list is always the empty string.
inline std::string merge(const std::vector<ClaimRecord>& claims, MergeBackend backend,
                         ChatCompleter* rewriter = nullptr) {
  if (claims.empty()) return "";
  if (backend == MergeBackend::concatenate) {
    std::string out;
    for (const auto& c : claims) {
      if (!out.empty()) out += ' ';
      out += c.text;
    }
    return out;
  }
  if (rewriter == nullptr) {
    throw ConfigError("external_llm merge: no chat backend configured");
  }
  std::string prompt = "Claims to merge:\n";
  for (const auto& c : claims) prompt += "- " + c.text + "\n";
  prompt += "\nMerged answer:";
  return rewriter->complete(detail::kMergeSystemMessage, prompt);
}

struct PipelineConfig {
  AnnotatorConfig annotator;
  DecomposeBackend decompose_backend = DecomposeBackend::sentence_split;
  MergeBackend merge_backend = MergeBackend::concatenate;
  GroupPolicy policy = GroupPolicy::strict;
  std::size_t concurrency = 0;  // 0 = hardware default

  std::size_t effective_concurrency() const {
    return concurrency == 0 ? detail::default_concurrency() : concurrency;
  }
};

namespace detail {

// Rethrows any toolkit error with the owning record's query id prepended,
// preserving the error type so exit-code mapping stays intact.
template <typename Fn>
inline void with_record_context(const std::string& query_id, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError("record \"" + query_id + "\": " + e.what());
  } catch (const BackendError& e) {
    throw BackendError("record \"" + query_id + "\": " + e.what());
  } catch (const DataError& e) {
    throw DataError("record \"" + query_id + "\": " + e.what());
  }
}

// Decomposes the raw answer when the record arrived without claims, then
// embeds and scores. The shared stage of calibration and inference.
inline void prepare_record(AnswerRecord& record, const PipelineConfig& cfg, Embedder& embedder,
                           ChatCompleter* rewriter) {
  if (record.claims.empty() && record.raw_answer && !record.raw_answer->empty()) {
    record.claims = decompose(*record.raw_answer, cfg.decompose_backend, rewriter);
  }
  ensure_embeddings(record, embedder);
  score_claims(record);
}

}  // namespace detail

namespace detail {

// Decompose/embed/score every record concurrently; annotate too when a
// config is given. Results are independent of the concurrency level.
inline void prepare_records(std::vector<AnswerRecord>& records, const PipelineConfig& cfg,
                            Embedder& embedder, ChatCompleter* judge, ChatCompleter* rewriter,
                            bool annotate) {
  detail::parallel_for(records.size(), cfg.effective_concurrency(), [&](std::size_t i) {
    detail::with_record_context(records[i].query.id, [&] {
      detail::prepare_record(records[i], cfg, embedder, rewriter);
      if (annotate) records[i] = annotate_record(records[i], cfg.annotator, judge, 1);
    });
  });
}

inline CalibrationResult calibrate_prepared(const std::vector<AnswerRecord>& records,
                                            double alpha, CalibrationMode mode,
                                            const PipelineConfig& cfg, Embedder& embedder) {
  CalibrationResult result = mode == CalibrationMode::marginal
                                 ? calibrate_marginal(records, alpha)
                                 : calibrate_mondrian(records, alpha);
  result.annotator_kind = annotator_kind_name(cfg.annotator.kind);
  result.provider_kind = embedder.name();
  return result;
}

}  // namespace detail

// Scores and annotates every record, then calibrates a threshold (or one
// per group).
inline CalibrationResult run_calibration(std::vector<AnswerRecord> records, double alpha,
                                         CalibrationMode mode, const PipelineConfig& cfg,
                                         Embedder& embedder, ChatCompleter* judge = nullptr,
                                         ChatCompleter* rewriter = nullptr) {
  if (records.empty()) throw DataError("calibration dataset is empty");
  detail::prepare_records(records, cfg, embedder, judge, rewriter, /*annotate=*/true);
  return detail::calibrate_prepared(records, alpha, mode, cfg, embedder);
}

inline CalibrationResult run_calibration(const std::string& dataset_path, double alpha,
                                         CalibrationMode mode, const PipelineConfig& cfg,
                                         Embedder& embedder, ChatCompleter* judge = nullptr,
                                         ChatCompleter* rewriter = nullptr,
                                         const EmbeddingStore* store = nullptr) {
  // Only the oracle annotator consumes labels straight from the file; the
  // other backends produce labels, so their datasets load leniently.
  Split strictness =
      cfg.annotator.kind == AnnotatorKind::oracle ? Split::calibration : Split::test;
  return run_calibration(load_dataset(dataset_path, strictness, store), alpha, mode, cfg,
                         embedder, judge, rewriter);
}

struct InferenceResult {
  FilterOutcome outcome;
  std::string merged_answer;
};

namespace detail {

// Filter + merge for records that are already scored.
inline std::vector<InferenceResult> infer_prepared(const std::vector<AnswerRecord>& records,
                                                   const CalibrationResult& calib,
                                                   const PipelineConfig& cfg,
                                                   ChatCompleter* rewriter) {
  std::vector<InferenceResult> results(records.size());
  detail::parallel_for(records.size(), cfg.effective_concurrency(), [&](std::size_t i) {
    detail::with_record_context(records[i].query.id, [&] {
      Threshold q = threshold_for(calib, records[i].query.group, cfg.policy);
      results[i].outcome = filter_claims(records[i].claims, q, records[i].query.id);
      results[i].merged_answer = merge(results[i].outcome.retained, cfg.merge_backend, rewriter);
    });
  });
  return results;
}

}  // namespace detail

// Filters every record against its group's calibrated threshold and merges
// the surviving claims. Outputs are in input order. Test records need no
// labels.
inline std::vector<InferenceResult> run_inference(std::vector<AnswerRecord> records,
                                                  const CalibrationResult& calib,
                                                  const PipelineConfig& cfg, Embedder& embedder,
                                                  ChatCompleter* rewriter = nullptr) {
  detail::prepare_records(records, cfg, embedder, /*judge=*/nullptr, rewriter,
                          /*annotate=*/false);
  return detail::infer_prepared(records, calib, cfg, rewriter);
}

inline std::vector<InferenceResult> run_inference(const std::string& dataset_path,
                                                  const CalibrationResult& calib,
                                                  const PipelineConfig& cfg, Embedder& embedder,
                                                  ChatCompleter* rewriter = nullptr,
                                                  const EmbeddingStore* store = nullptr) {
  return run_inference(load_dataset(dataset_path, Split::test, store), calib, cfg, embedder,
                       rewriter);
}

inline json inference_to_json(const InferenceResult& result) {
  json retained = json::array();
  for (const auto& c : result.outcome.retained) {
    retained.push_back({{"id", c.id}, {"text", c.text}, {"relevance", c.relevance.value_or(0.0)}});
  }
  json removed = json::array();
  for (const auto& c : result.outcome.removed) {
    removed.push_back({{"id", c.id}, {"text", c.text}, {"relevance", c.relevance.value_or(0.0)}});
  }
  return json{{"query_id", result.outcome.query_id},
              {"threshold", result.outcome.threshold_used.is_reject_all()
                                ? json("REJECT_ALL")
                                : json(result.outcome.threshold_used.q())},
              {"retained", std::move(retained)},
              {"removed", std::move(removed)},
              {"merged_answer", result.merged_answer}};
}

// --- Evaluation --------------------------------------------------------------

struct GroupEvaluation {
  std::size_t n = 0;
  double removal_rate = 0.0;
  double empirical_factuality = 0.0;
  double empirical_factuality_claim = 1.0;
};

struct RecordEvaluation {
  std::string query_id;
  std::size_t retained_count = 0;
  std::size_t removed_count = 0;
  bool all_retained_factual = true;
};

struct EvaluationReport {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  CalibrationMode mode = CalibrationMode::marginal;
  std::size_t n_test = 0;
  // Removal has no canonical averaging; both are emitted, macro is the
  // headline. Macro = mean over records of removed/max(1,claims);
  // micro = pooled removed claims / pooled claims.
  double removal_rate = 0.0;
  double removal_rate_micro = 0.0;
  // Record-level: fraction of records whose every retained claim is factual
  // (empty retained set counts as factual — vacuous entailment).
  double empirical_factuality = 0.0;
  // Claim-level companion: pooled fraction of retained claims labeled
  // factual (1.0 when nothing is retained anywhere).
  double empirical_factuality_claim = 1.0;
  std::map<std::string, GroupEvaluation> per_group;
  std::vector<RecordEvaluation> per_record;
};

// Scores filtered outcomes against ground-truth labels. Every outcome must
// match a labeled test record by query id, one to one, and every claim in
// an outcome must exist (labeled) in its test record.
inline EvaluationReport evaluate(const std::vector<FilterOutcome>& outcomes,
                                 const std::vector<AnswerRecord>& labeled_test,
                                 double alpha = std::numeric_limits<double>::quiet_NaN(),
                                 CalibrationMode mode = CalibrationMode::marginal) {
  if (outcomes.size() != labeled_test.size()) {
    throw DataError("evaluate: " + std::to_string(outcomes.size()) + " outcomes vs " +
                    std::to_string(labeled_test.size()) + " test records");
  }
  std::unordered_map<std::string, const AnswerRecord*> by_id;
  for (const auto& record : labeled_test) by_id[record.query.id] = &record;

  EvaluationReport report;
  report.alpha = alpha;
  report.mode = mode;
  report.n_test = outcomes.size();

  struct Accum {
    std::size_t n = 0;
    double removal_sum = 0.0;
    std::size_t factual_records = 0;
    std::size_t retained_total = 0;
    std::size_t retained_factual = 0;
    std::size_t removed_total = 0;
    std::size_t claims_total = 0;
  };
  Accum all;
  std::map<std::string, Accum> groups;
  std::unordered_set<std::string> seen;

  for (const auto& outcome : outcomes) {
    if (!seen.insert(outcome.query_id).second) {
      throw DataError("evaluate: duplicate outcome for query \"" + outcome.query_id + "\"");
    }
    auto it = by_id.find(outcome.query_id);
    if (it == by_id.end()) {
      throw DataError("evaluate: no test record for query \"" + outcome.query_id + "\"");
    }
    const AnswerRecord& record = *it->second;
    std::unordered_map<std::string, Label> labels;
    for (const auto& claim : record.claims) labels[claim.id] = claim.label;

    auto label_of = [&](const ClaimRecord& claim) {
      auto lit = labels.find(claim.id);
      if (lit == labels.end()) {
        throw DataError("evaluate: claim \"" + claim.id + "\" of query \"" + outcome.query_id +
                        "\" not present in the test record");
      }
      if (lit->second == Label::unlabeled) {
        throw DataError("evaluate: claim \"" + claim.id + "\" of query \"" + outcome.query_id +
                        "\" is unlabeled");
      }
      return lit->second;
    };

    RecordEvaluation re;
    re.query_id = outcome.query_id;
    re.retained_count = outcome.retained.size();
    re.removed_count = outcome.removed.size();
    std::size_t retained_factual = 0;
    for (const auto& claim : outcome.retained) {
      if (label_of(claim) == Label::factual) {
        ++retained_factual;
      } else {
        re.all_retained_factual = false;
      }
    }
    for (const auto& claim : outcome.removed) label_of(claim);  // validate labels exist

    const std::size_t claim_count = re.retained_count + re.removed_count;
    const double removal =
        static_cast<double>(re.removed_count) / static_cast<double>(std::max<std::size_t>(1, claim_count));

    auto fold = [&](Accum& a) {
      a.n += 1;
      a.removal_sum += removal;
      a.factual_records += re.all_retained_factual ? 1 : 0;
      a.retained_total += re.retained_count;
      a.retained_factual += retained_factual;
      a.removed_total += re.removed_count;
      a.claims_total += claim_count;
    };
    fold(all);
    if (record.query.group && !record.query.group->empty()) fold(groups[*record.query.group]);
    report.per_record.push_back(std::move(re));
  }

  auto finish = [](const Accum& a, std::size_t n_override = 0) {
    GroupEvaluation g;
    g.n = n_override ? n_override : a.n;
    if (a.n > 0) {
      g.removal_rate = a.removal_sum / static_cast<double>(a.n);
      g.empirical_factuality = static_cast<double>(a.factual_records) / static_cast<double>(a.n);
    }
    g.empirical_factuality_claim =
        a.retained_total == 0
            ? 1.0
            : static_cast<double>(a.retained_factual) / static_cast<double>(a.retained_total);
    return g;
  };

  GroupEvaluation overall = finish(all);
  report.removal_rate = overall.removal_rate;
  report.removal_rate_micro =
      all.claims_total == 0
          ? 0.0
          : static_cast<double>(all.removed_total) / static_cast<double>(all.claims_total);
  report.empirical_factuality = overall.empirical_factuality;
  report.empirical_factuality_claim = overall.empirical_factuality_claim;
  for (const auto& [label, accum] : groups) report.per_group[label] = finish(accum);
  return report;
}

inline EvaluationReport evaluate(const std::vector<InferenceResult>& results,
                                 const std::vector<AnswerRecord>& labeled_test,
                                 double alpha = std::numeric_limits<double>::quiet_NaN(),
                                 CalibrationMode mode = CalibrationMode::marginal) {
  std::vector<FilterOutcome> outcomes;
  outcomes.reserve(results.size());
  for (const auto& r : results) outcomes.push_back(r.outcome);
  return evaluate(outcomes, labeled_test, alpha, mode);
}

// --- Report emission ---------------------------------------------------------

// Fixed-precision decimal with trailing zeros trimmed, so reports are
// byte-stable across platforms and runs.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  return s;
}

inline json report_to_json(const EvaluationReport& report) {
  json per_group = json::object();
  for (const auto& [label, g] : report.per_group) {
    per_group[label] = {{"n", g.n},
                        {"removal_rate", g.removal_rate},
                        {"empirical_factuality_record", g.empirical_factuality},
                        {"empirical_factuality_claim", g.empirical_factuality_claim}};
  }
  json per_record = json::array();
  for (const auto& r : report.per_record) {
    per_record.push_back({{"query_id", r.query_id},
                          {"retained_count", r.retained_count},
                          {"removed_count", r.removed_count},
                          {"all_retained_factual", r.all_retained_factual}});
  }
  return json{{"alpha", report.alpha},
              {"mode", calibration_mode_name(report.mode)},
              {"n_test", report.n_test},
              {"removal_rate", report.removal_rate},
              {"removal_rate_micro", report.removal_rate_micro},
              {"empirical_factuality_record", report.empirical_factuality},
              {"empirical_factuality_claim", report.empirical_factuality_claim},
              {"per_group", std::move(per_group)},
              {"per_record", std::move(per_record)}};
}

inline constexpr const char* kReportCsvHeader =
    "alpha,mode,group,n,removal_rate,empirical_factuality_record,empirical_factuality_claim";

// One aggregate row (group = __all__) followed by one row per group in byte
// order. Group labels containing CSV-breaking characters are rejected
// rather than quoted, keeping the format trivially parseable.
inline void append_report_csv(std::string& out, const EvaluationReport& report) {
  auto row = [&](const std::string& group, std::size_t n, double removal, double fact_record,
                 double fact_claim) {
    out += format_number(report.alpha);
    out += ',';
    out += calibration_mode_name(report.mode);
    out += ',';
    out += group;
    out += ',';
    out += std::to_string(n);
    out += ',';
    out += format_number(removal);
    out += ',';
    out += format_number(fact_record);
    out += ',';
    out += format_number(fact_claim);
    out += '\n';
  };
  row("__all__", report.n_test, report.removal_rate, report.empirical_factuality,
      report.empirical_factuality_claim);
  for (const auto& [label, g] : report.per_group) {
    if (label.find_first_of(",\"\n\r") != std::string::npos) {
      throw DataError("group label \"" + label + "\" contains characters not representable in CSV");
    }
    row(label, g.n, g.removal_rate, g.empirical_factuality, g.empirical_factuality_claim);
  }
}

inline std::string reports_to_csv(const std::vector<EvaluationReport>& reports) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const auto& report : reports) append_report_csv(out, report);
  return out;
}

// Calibrates on one dataset and evaluates filtering on another, once per
// significance level, in the order given. The usual way to produce
// removal/factuality-versus-alpha curves. Scoring and annotation run once;
// only the quantile and the filtering differ across levels.
inline std::vector<EvaluationReport> run_sweep(std::vector<AnswerRecord> calibration,
                                               std::vector<AnswerRecord> test,
                                               const std::vector<double>& alphas,
                                               CalibrationMode mode, const PipelineConfig& cfg,
                                               Embedder& embedder,
                                               ChatCompleter* judge = nullptr,
                                               ChatCompleter* rewriter = nullptr) {
  if (alphas.empty()) throw ConfigError("sweep needs at least one alpha");
  if (calibration.empty()) throw DataError("calibration dataset is empty");
  detail::prepare_records(calibration, cfg, embedder, judge, rewriter, /*annotate=*/true);
  detail::prepare_records(test, cfg, embedder, /*judge=*/nullptr, rewriter, /*annotate=*/false);

  std::vector<EvaluationReport> reports;
  reports.reserve(alphas.size());
  for (double alpha : alphas) {
    CalibrationResult calib = detail::calibrate_prepared(calibration, alpha, mode, cfg, embedder);
    std::vector<InferenceResult> results = detail::infer_prepared(test, calib, cfg, rewriter);
    reports.push_back(evaluate(results, test, alpha, mode));
  }
  return reports;
}

}  // namespace cclaims
