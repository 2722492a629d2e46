#pragma once
// The statistical core: conformal scores, finite-sample quantiles, claim
// filtering, marginal and group-conditional calibration, and pinball loss.
//
// Guarantee being implemented: calibrate a threshold q̂ on n labeled records
// so that, for an exchangeable test record, every retained claim is factual
// with probability at least 1−α. The score of a record is the smallest
// threshold at which filtering keeps only factual claims, which equals the
// maximum relevance among its nonfactual claims (0 when there are none);
// q̂ is the k-th smallest calibration score with k = ⌈(n+1)(1−α)⌉, and
// k > n yields the vacuous reject-everything threshold.
//
// Retention is STRICT (relevance > q̂): with the score defined as the max
// nonfactual relevance, "all retained claims factual" is exactly the event
// S_test ≤ q̂, so the split-conformal bound applies verbatim even when
// scores tie at the threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"

namespace cclaims {

// A filtering threshold: either a finite real or the explicit "reject all
// claims" sentinel (conceptually +∞; relevances are capped at 1, so any
// in-range magic number would be ambiguous). Filtering accepts any finite
// value — e.g. −1 retains everything — while calibration artifacts are
// validated to [0,1] at (de)serialization.
class Threshold {
 public:
  static Threshold reject_all() {
    Threshold t;
    t.reject_all_ = true;
    return t;
  }

  static Threshold value(double q) {
    if (!std::isfinite(q)) throw DataError("threshold must be finite");
    Threshold t;
    t.q_ = q;
    return t;
  }

  bool is_reject_all() const { return reject_all_; }

  double q() const {
    if (reject_all_) throw DataError("REJECT_ALL threshold has no numeric value");
    return q_;
  }

  bool operator==(const Threshold& other) const {
    if (reject_all_ != other.reject_all_) return false;
    return reject_all_ || q_ == other.q_;
  }
  bool operator!=(const Threshold& other) const { return !(*this == other); }

  std::string str() const { return reject_all_ ? "REJECT_ALL" : std::to_string(q_); }

 private:
  double q_ = 0.0;
  bool reject_all_ = false;
};

struct ConformalScore {
  std::string query_id;
  double score = 0.0;  // in [0,1]; 0 encodes "no nonfactual claim"
  std::optional<std::string> group;
};

struct GroupCalibration {
  Threshold q;
  std::size_t n = 0;
};

struct CalibrationResult {
  double alpha = 0.1;
  Threshold marginal_q;
  std::map<std::string, GroupCalibration> per_group;  // empty for marginal mode
  std::size_t n = 0;
  std::string annotator_kind;
  std::string provider_kind;
  std::int64_t created_unix = 0;
};

struct FilterOutcome {
  std::string query_id;
  Threshold threshold_used;
  std::vector<ClaimRecord> retained;
  std::vector<ClaimRecord> removed;
};

enum class GroupPolicy { strict, fallback_marginal };

inline GroupPolicy group_policy_from_name(const std::string& name) {
  if (name == "strict") return GroupPolicy::strict;
  if (name == "fallback_marginal") return GroupPolicy::fallback_marginal;
  throw ConfigError("unknown group policy \"" + name + "\" (expected strict or fallback_marginal)");
}

enum class CalibrationMode { marginal, mondrian };

inline std::string calibration_mode_name(CalibrationMode mode) {
  return mode == CalibrationMode::marginal ? "marginal" : "mondrian";
}

inline CalibrationMode calibration_mode_from_name(const std::string& name) {
  if (name == "marginal") return CalibrationMode::marginal;
  if (name == "mondrian") return CalibrationMode::mondrian;
  throw ConfigError("unknown mode \"" + name + "\" (expected marginal or mondrian)");
}

// Splits claims around a threshold. Retained = relevance strictly above q;
// the REJECT_ALL sentinel retains nothing. Both lists preserve input order.
inline FilterOutcome filter_claims(const std::vector<ClaimRecord>& claims, const Threshold& q,
                                   std::string query_id = "") {
  FilterOutcome out;
  out.query_id = std::move(query_id);
  out.threshold_used = q;
  for (const auto& claim : claims) {
    if (!claim.relevance) {
      throw DataError("claim \"" + claim.id + "\" has no relevance score; run scoring first");
    }
    if (!q.is_reject_all() && *claim.relevance > q.q()) {
      out.retained.push_back(claim);
    } else {
      out.removed.push_back(claim);
    }
  }
  return out;
}

// The record's conformal score: the smallest threshold at which filtering
// keeps only factual claims. Equals the max relevance among nonfactual
// claims; 0 when every claim is factual or the record has no claims.
inline ConformalScore conformal_score(const AnswerRecord& record) {
  ConformalScore cs;
  cs.query_id = record.query.id;
  cs.group = record.query.group;
  double worst = 0.0;
  for (const auto& claim : record.claims) {
    if (claim.label == Label::unlabeled) {
      throw DataError("claim \"" + claim.id + "\" in record \"" + record.query.id +
                      "\" is unlabeled; annotate before calibrating");
    }
    if (!claim.relevance) {
      throw DataError("claim \"" + claim.id + "\" in record \"" + record.query.id +
                      "\" has no relevance score");
    }
    if (claim.label == Label::nonfactual) worst = std::max(worst, *claim.relevance);
  }
  cs.score = worst;
  return cs;
}

// Finite-sample conformal quantile: the k-th smallest score (1-indexed,
// duplicates kept, no interpolation) with k = ⌈(n+1)(1−α)⌉, or REJECT_ALL
// when k > n. Interpolated quantiles would void the coverage bound.
inline Threshold conformal_quantile(const std::vector<double>& scores, double alpha) {
  if (scores.empty()) throw DataError("conformal quantile of an empty score list");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DataError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw DataError("conformal score " + std::to_string(s) + " outside [0,1]");
    }
  }
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(
      std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));
  if (k > n) return Threshold::reject_all();
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   sorted.end());
  return Threshold::value(sorted[k - 1]);
}

inline std::vector<ConformalScore> collect_scores(const std::vector<AnswerRecord>& records) {
  std::vector<ConformalScore> scores;
  scores.reserve(records.size());
  for (const auto& record : records) scores.push_back(conformal_score(record));
  return scores;
}

namespace detail {

inline std::vector<double> raw_scores(const std::vector<ConformalScore>& scores) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(s.score);
  return out;
}

// Wall-clock seconds, overridable through SOURCE_DATE_EPOCH for
// byte-reproducible artifacts.
inline std::int64_t timestamp_unix() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') return static_cast<std::int64_t>(v);
  }
  return static_cast<std::int64_t>(std::time(nullptr));
}

}  // namespace detail

// One pooled threshold over all calibration records.
inline CalibrationResult calibrate_marginal(const std::vector<AnswerRecord>& records,
                                            double alpha) {
  CalibrationResult result;
  result.alpha = alpha;
  result.n = records.size();
  result.marginal_q = conformal_quantile(detail::raw_scores(collect_scores(records)), alpha);
  result.created_unix = detail::timestamp_unix();
  return result;
}

// One threshold per group (every record must carry a group label), plus the
// pooled marginal threshold for fallback reporting. With a single group the
// per-group threshold is identical to calibrate_marginal's.
inline CalibrationResult calibrate_mondrian(const std::vector<AnswerRecord>& records,
                                            double alpha) {
  CalibrationResult result;
  result.alpha = alpha;
  result.n = records.size();

  std::map<std::string, std::vector<double>> grouped;
  std::vector<double> pooled;
  pooled.reserve(records.size());
  for (const auto& record : records) {
    ConformalScore cs = conformal_score(record);
    if (!cs.group || cs.group->empty()) {
      throw DataError("record \"" + record.query.id + "\" has no group label; required for group-conditional calibration");
    }
    grouped[*cs.group].push_back(cs.score);
    pooled.push_back(cs.score);
  }

  result.marginal_q = conformal_quantile(pooled, alpha);
  for (const auto& [label, scores] : grouped) {
    result.per_group[label] = GroupCalibration{conformal_quantile(scores, alpha), scores.size()};
  }
  result.created_unix = detail::timestamp_unix();
  return result;
}

// Threshold lookup for a test record's group. A marginal calibration (empty
// per_group) always answers with the pooled threshold. A group-conditional
// calibration requires a known group under the strict policy and falls back
// to the pooled threshold under fallback_marginal.
inline Threshold threshold_for(const CalibrationResult& calib,
                               const std::optional<std::string>& group, GroupPolicy policy) {
  if (calib.per_group.empty()) return calib.marginal_q;
  if (group && !group->empty()) {
    auto it = calib.per_group.find(*group);
    if (it != calib.per_group.end()) return it->second.q;
  }
  if (policy == GroupPolicy::fallback_marginal) return calib.marginal_q;
  throw DataError("no calibrated threshold for group \"" + group.value_or("<none>") +
                  "\" under strict policy");
}

// ℓ_α(r) = (1−α)·max(r,0) + α·max(−r,0). Its empirical minimizer over
// thresholds t of mean ℓ_α(s_i − t) is the (1−α) sample quantile, which is
// what ties the per-group thresholds to the quantile-regression view.
inline double pinball_loss(double r, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DataError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  return (1.0 - alpha) * std::max(r, 0.0) + alpha * std::max(-r, 0.0);
}

// --- CalibrationResult (de)serialization -----------------------------------

namespace detail {

inline json threshold_to_json(const Threshold& t) {
  if (t.is_reject_all()) return json("REJECT_ALL");
  if (!(t.q() >= 0.0 && t.q() <= 1.0)) {
    throw DataError("calibrated threshold " + std::to_string(t.q()) + " outside [0,1]");
  }
  return json(t.q());
}

inline Threshold threshold_from_json(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "REJECT_ALL") return Threshold::reject_all();
    throw DataError(where + ": threshold string must be \"REJECT_ALL\"");
  }
  if (!j.is_number()) throw DataError(where + ": threshold must be a number or \"REJECT_ALL\"");
  double q = j.get<double>();
  if (!(q >= 0.0 && q <= 1.0)) {
    throw DataError(where + ": calibrated threshold " + std::to_string(q) + " outside [0,1]");
  }
  return Threshold::value(q);
}

}  // namespace detail

inline json calibration_to_json(const CalibrationResult& calib) {
  if (!(calib.alpha > 0.0 && calib.alpha < 1.0)) {
    throw DataError("calibration alpha outside (0,1)");
  }
  json per_group = json::object();
  for (const auto& [label, gc] : calib.per_group) {
    per_group[label] = {{"q", detail::threshold_to_json(gc.q)}, {"n", gc.n}};
  }
  return json{{"alpha", calib.alpha},
              {"marginal_q", detail::threshold_to_json(calib.marginal_q)},
              {"per_group", std::move(per_group)},
              {"n", calib.n},
              {"annotator", calib.annotator_kind},
              {"provider", calib.provider_kind},
              {"created_unix", calib.created_unix}};
}

inline CalibrationResult calibration_from_json(const json& j, const std::string& where = "calibration") {
  if (!j.is_object()) throw DataError(where + ": expected a JSON object");
  CalibrationResult calib;
  if (!j.contains("alpha") || !j["alpha"].is_number()) {
    throw DataError(where + ": missing numeric \"alpha\"");
  }
  calib.alpha = j["alpha"].get<double>();
  if (!(calib.alpha > 0.0 && calib.alpha < 1.0)) {
    throw DataError(where + ": alpha " + std::to_string(calib.alpha) + " outside (0,1)");
  }
  if (!j.contains("marginal_q")) throw DataError(where + ": missing \"marginal_q\"");
  calib.marginal_q = detail::threshold_from_json(j["marginal_q"], where + ".marginal_q");
  if (j.contains("per_group")) {
    if (!j["per_group"].is_object()) throw DataError(where + ": \"per_group\" must be an object");
    for (const auto& [label, entry] : j["per_group"].items()) {
      if (!entry.is_object() || !entry.contains("q") || !entry.contains("n") ||
          !entry["n"].is_number_unsigned()) {
        throw DataError(where + ".per_group." + label + ": expected {\"q\", \"n\"}");
      }
      GroupCalibration gc;
      gc.q = detail::threshold_from_json(entry["q"], where + ".per_group." + label);
      gc.n = entry["n"].get<std::size_t>();
      calib.per_group[label] = gc;
    }
  }
  if (!j.contains("n") || !j["n"].is_number_unsigned()) {
    throw DataError(where + ": missing non-negative integer \"n\"");
  }
  calib.n = j["n"].get<std::size_t>();
  if (j.contains("annotator") && j["annotator"].is_string()) {
    calib.annotator_kind = j["annotator"].get<std::string>();
  }
  if (j.contains("provider") && j["provider"].is_string()) {
    calib.provider_kind = j["provider"].get<std::string>();
  }
  if (j.contains("created_unix") && j["created_unix"].is_number_integer()) {
    calib.created_unix = j["created_unix"].get<std::int64_t>();
  }
  return calib;
}

inline void save_calibration(const std::string& path, const CalibrationResult& calib) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write calibration file \"" + path + "\"");
  out << calibration_to_json(calib).dump(2) << '\n';
}

inline CalibrationResult load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration file \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
  return calibration_from_json(j, path);
}

}  // namespace cclaims
