#pragma once
// Synthetic population generator and Monte Carlo harness. Generates labeled
// records with directly injected relevance scores (no embeddings, no
// external services), so the calibrate→filter→evaluate loop can be checked
// against its distributional guarantees:
//
//   marginal:  P(every retained claim factual) ≥ 1−α
//   grouped:   the same bound conditioned on each group label
//
// and, because the quantile is a k-th order statistic with
// k = ⌈(n+1)(1−α)⌉, the matching over-coverage ceiling
// 1−α + 1/(n_calibration+1) for continuous scores. Each trial draws fresh
// calibration AND test data, so the estimate targets the probability the
// guarantee actually bounds (over both draws).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cclaims/conformal.hpp"
#include "cclaims/corpus.hpp"
#include "cclaims/errors.hpp"
#include "cclaims/parallel.hpp"
#include "cclaims/pipeline.hpp"
#include "cclaims/random.hpp"

namespace cclaims {

struct GroupSpec {
  std::string label;
  double weight = 1.0;
  std::size_t claim_count_min = 3;
  std::size_t claim_count_max = 8;
  double factual_prob = 0.8;       // chance each claim is factual
  double score_separation = 0.0;   // how strongly factual claims outscore nonfactual
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_calibration = 500;
  std::size_t n_test = 200;
  std::vector<GroupSpec> groups;
  std::size_t trials = 1000;
  // Test-only corruption hook: shifts the quantile index by this many
  // positions so the self-test can prove it detects a miscalibrated
  // threshold. Leave at 0 for real use.
  long quantile_bias = 0;

  void validate() const {
    if (n_calibration == 0) throw ConfigError("n_calibration must be positive");
    if (n_test == 0) throw ConfigError("n_test must be positive");
    if (trials == 0) throw ConfigError("trials must be positive");
    if (groups.empty()) throw ConfigError("at least one group spec is required");
    for (const auto& g : groups) {
      if (g.label.empty()) throw ConfigError("group label must be non-empty");
      if (!(g.weight > 0.0)) throw ConfigError("group \"" + g.label + "\": weight must be positive");
      if (g.claim_count_min == 0 || g.claim_count_min > g.claim_count_max) {
        throw ConfigError("group \"" + g.label + "\": invalid claim_count_range");
      }
      if (!(g.factual_prob >= 0.0 && g.factual_prob <= 1.0)) {
        throw ConfigError("group \"" + g.label + "\": factual_prob outside [0,1]");
      }
      if (!(g.score_separation >= 0.0 && g.score_separation <= 1.0)) {
        throw ConfigError("group \"" + g.label + "\": score_separation outside [0,1]");
      }
    }
  }
};

// Pluggable relevance sampler, for robustness sweeps beyond the default
// uniform families.
using ScoreSampler = std::function<double(detail::Rng&, bool factual, const GroupSpec&)>;

// Default families: factual ~ U(separation, 1), nonfactual ~ U(0, 1−separation).
// separation = 1 makes the supports disjoint; 0 makes the label carry no
// score information at all.
inline double default_score_sampler(detail::Rng& rng, bool factual, const GroupSpec& group) {
  return factual ? rng.uniform(group.score_separation, 1.0)
                 : rng.uniform(0.0, 1.0 - group.score_separation);
}

namespace detail {

inline const GroupSpec& pick_group(Rng& rng, const std::vector<GroupSpec>& groups) {
  double total = 0.0;
  for (const auto& g : groups) total += g.weight;
  double u = rng.uniform() * total;
  double cum = 0.0;
  for (const auto& g : groups) {
    cum += g.weight;
    if (u < cum) return g;
  }
  return groups.back();
}

inline AnswerRecord synth_record(Rng& rng, const SynthConfig& cfg, const ScoreSampler& sampler,
                                 const std::string& query_id) {
  const GroupSpec& group = pick_group(rng, cfg.groups);
  AnswerRecord record;
  record.query.id = query_id;
  record.query.text = "synthetic query " + query_id;
  record.query.group = group.label;
  std::size_t claim_count = rng.uniform_int(group.claim_count_min, group.claim_count_max);
  record.claims.reserve(claim_count);
  for (std::size_t k = 0; k < claim_count; ++k) {
    ClaimRecord claim;
    claim.id = "c" + std::to_string(k + 1);
    claim.text = "synthetic claim " + query_id + "-" + std::to_string(k + 1);
    bool factual = rng.bernoulli(group.factual_prob);
    claim.label = factual ? Label::factual : Label::nonfactual;
    double r = sampler(rng, factual, group);
    if (!(r >= 0.0 && r <= 1.0)) {
      throw DataError("score sampler returned " + std::to_string(r) + " outside [0,1]");
    }
    claim.relevance = r;
    record.claims.push_back(std::move(claim));
  }
  return record;
}

}  // namespace detail

struct SynthDataset {
  std::vector<AnswerRecord> calibration;
  std::vector<AnswerRecord> test;
};

// Deterministic in cfg.seed: one sequential stream drives group choice,
// claim counts, labels, and scores.
inline SynthDataset generate(const SynthConfig& cfg,
                             const ScoreSampler& sampler = default_score_sampler) {
  cfg.validate();
  detail::Rng rng(cfg.seed);
  SynthDataset data;
  data.calibration.reserve(cfg.n_calibration);
  for (std::size_t i = 0; i < cfg.n_calibration; ++i) {
    data.calibration.push_back(detail::synth_record(rng, cfg, sampler, "cal-" + std::to_string(i + 1)));
  }
  data.test.reserve(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    data.test.push_back(detail::synth_record(rng, cfg, sampler, "test-" + std::to_string(i + 1)));
  }
  return data;
}

namespace detail {

// Quantile with a deliberately shifted order-statistic index; the
// quantile_bias hook routes through here so a corrupted threshold is
// distinguishable from the real rule (which stays in conformal_quantile).
inline Threshold biased_quantile(std::vector<double> scores, double alpha, long bias) {
  const auto n = static_cast<long>(scores.size());
  long k = static_cast<long>(
               std::ceil(static_cast<double>(n + 1) * (1.0 - alpha))) +
           bias;
  if (k > n) return Threshold::reject_all();
  if (k < 1) k = 1;
  std::sort(scores.begin(), scores.end());
  return Threshold::value(scores[static_cast<std::size_t>(k - 1)]);
}

inline CalibrationResult calibrate_synth(const std::vector<AnswerRecord>& records, double alpha,
                                         CalibrationMode mode, long bias) {
  CalibrationResult calib = mode == CalibrationMode::marginal
                                ? calibrate_marginal(records, alpha)
                                : calibrate_mondrian(records, alpha);
  if (bias != 0) {
    std::map<std::string, std::vector<double>> grouped;
    std::vector<double> pooled;
    for (const auto& cs : collect_scores(records)) {
      pooled.push_back(cs.score);
      if (cs.group) grouped[*cs.group].push_back(cs.score);
    }
    calib.marginal_q = biased_quantile(pooled, alpha, bias);
    for (auto& [label, gc] : calib.per_group) {
      gc.q = biased_quantile(grouped[label], alpha, bias);
    }
  }
  return calib;
}

}  // namespace detail

struct TrialOutcome {
  double factuality = 0.0;  // record-level indicator mean on this trial's test set
  double removal = 0.0;     // macro removal rate
  std::map<std::string, double> group_factuality;
  std::map<std::string, std::size_t> group_n;
};

// One full cycle on fresh data: generate with a per-trial derived seed,
// calibrate, filter the test records, evaluate against the known labels.
inline TrialOutcome run_coverage_trial(const SynthConfig& cfg, double alpha,
                                       CalibrationMode mode, std::uint64_t trial_index) {
  SynthConfig trial_cfg = cfg;
  trial_cfg.seed = detail::Rng::derive(cfg.seed, trial_index);
  SynthDataset data = generate(trial_cfg);

  CalibrationResult calib =
      detail::calibrate_synth(data.calibration, alpha, mode, cfg.quantile_bias);

  std::vector<FilterOutcome> outcomes;
  outcomes.reserve(data.test.size());
  for (const auto& record : data.test) {
    Threshold q = threshold_for(calib, record.query.group, GroupPolicy::strict);
    outcomes.push_back(filter_claims(record.claims, q, record.query.id));
  }
  EvaluationReport report = evaluate(outcomes, data.test, alpha, mode);

  TrialOutcome outcome;
  outcome.factuality = report.empirical_factuality;
  outcome.removal = report.removal_rate;
  for (const auto& [label, g] : report.per_group) {
    outcome.group_factuality[label] = g.empirical_factuality;
    outcome.group_n[label] = g.n;
  }
  return outcome;
}

struct CoverageStats {
  std::size_t trials = 0;
  double mean_factuality = 0.0;
  double se_factuality = 0.0;
  double mean_removal = 0.0;
};

struct CoverageSummary {
  double alpha = 0.1;
  CalibrationMode mode = CalibrationMode::marginal;
  std::size_t trials = 0;
  CoverageStats overall;
  std::map<std::string, CoverageStats> per_group;
};

namespace detail {

inline void finalize_stats(CoverageStats& stats, const std::vector<double>& factuality,
                           const std::vector<double>& removal) {
  stats.trials = factuality.size();
  if (factuality.empty()) return;
  double sum = 0.0;
  for (double f : factuality) sum += f;
  stats.mean_factuality = sum / static_cast<double>(factuality.size());
  double ss = 0.0;
  for (double f : factuality) ss += (f - stats.mean_factuality) * (f - stats.mean_factuality);
  if (factuality.size() > 1) {
    double var = ss / static_cast<double>(factuality.size() - 1);
    stats.se_factuality = std::sqrt(var / static_cast<double>(factuality.size()));
  }
  if (!removal.empty()) {
    double rsum = 0.0;
    for (double r : removal) rsum += r;
    stats.mean_removal = rsum / static_cast<double>(removal.size());
  }
}

}  // namespace detail

// Runs cfg.trials independent trials (concurrently; each derives its own
// stream from (seed, trial index), so scheduling cannot change results) and
// aggregates means and standard errors.
inline CoverageSummary run_coverage(const SynthConfig& cfg, double alpha, CalibrationMode mode,
                                    std::size_t concurrency = 0) {
  cfg.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  std::vector<TrialOutcome> outcomes(cfg.trials);
  detail::parallel_for(cfg.trials,
                       concurrency == 0 ? detail::default_concurrency() : concurrency,
                       [&](std::size_t t) {
                         outcomes[t] = run_coverage_trial(cfg, alpha, mode,
                                                          static_cast<std::uint64_t>(t));
                       });

  CoverageSummary summary;
  summary.alpha = alpha;
  summary.mode = mode;
  summary.trials = cfg.trials;

  std::vector<double> fact, removal;
  fact.reserve(cfg.trials);
  removal.reserve(cfg.trials);
  std::map<std::string, std::vector<double>> group_fact;
  for (const auto& o : outcomes) {
    fact.push_back(o.factuality);
    removal.push_back(o.removal);
    for (const auto& [label, f] : o.group_factuality) group_fact[label].push_back(f);
  }
  detail::finalize_stats(summary.overall, fact, removal);
  for (const auto& [label, values] : group_fact) {
    detail::finalize_stats(summary.per_group[label], values, /*removal=*/{});
  }
  return summary;
}

// Acceptance window for a coverage run: the guarantee's floor and, for
// (near-)continuous scores, the order-statistic ceiling, both padded by
// 3 standard errors plus a small absolute slack.
struct CoverageBounds {
  double lower = 0.0;
  double upper = 1.0;
};

inline CoverageBounds coverage_bounds(double alpha, std::size_t n_calibration, double se) {
  const double slack = 3.0 * se + 0.005;
  CoverageBounds b;
  b.lower = (1.0 - alpha) - slack;
  b.upper = (1.0 - alpha) + 1.0 / static_cast<double>(n_calibration + 1) + slack;
  return b;
}

// Checks the summary against the guarantee floor and over-coverage ceiling;
// returns human-readable violations (empty = all bounds hold). Group
// ceilings use the group's expected calibration share.
inline std::vector<std::string> check_coverage_bounds(const CoverageSummary& summary,
                                                      const SynthConfig& cfg) {
  std::vector<std::string> violations;
  auto check = [&](const std::string& scope, const CoverageStats& stats,
                   std::size_t n_calibration) {
    CoverageBounds b = coverage_bounds(summary.alpha, n_calibration, stats.se_factuality);
    if (stats.mean_factuality < b.lower) {
      violations.push_back(scope + ": mean factuality " + format_number(stats.mean_factuality) +
                           " below guarantee floor " + format_number(b.lower));
    }
    if (stats.mean_factuality > b.upper) {
      violations.push_back(scope + ": mean factuality " + format_number(stats.mean_factuality) +
                           " above over-coverage ceiling " + format_number(b.upper));
    }
  };
  check("overall", summary.overall, cfg.n_calibration);
  if (summary.mode == CalibrationMode::mondrian) {
    double total_weight = 0.0;
    for (const auto& g : cfg.groups) total_weight += g.weight;
    for (const auto& g : cfg.groups) {
      auto it = summary.per_group.find(g.label);
      if (it == summary.per_group.end()) continue;
      auto expected_n = static_cast<std::size_t>(
          std::max(1.0, std::floor(static_cast<double>(cfg.n_calibration) * g.weight / total_weight)));
      check("group " + g.label, it->second, expected_n);
    }
  }
  return violations;
}

// --- Config and summary serialization ---------------------------------------

inline SynthConfig synth_config_from_json(const json& j, const std::string& where = "synth config") {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  SynthConfig cfg;
  auto get_uint = [&](const char* key, std::size_t fallback) -> std::size_t {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned()) {
      throw ConfigError(where + ": \"" + key + "\" must be a non-negative integer");
    }
    return j[key].get<std::size_t>();
  };
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() && !j["seed"].is_number_unsigned()) {
      throw ConfigError(where + ": \"seed\" must be an integer");
    }
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.n_calibration = get_uint("n_calibration", cfg.n_calibration);
  cfg.n_test = get_uint("n_test", cfg.n_test);
  cfg.trials = get_uint("trials", cfg.trials);
  if (j.contains("quantile_bias")) {
    if (!j["quantile_bias"].is_number_integer()) {
      throw ConfigError(where + ": \"quantile_bias\" must be an integer");
    }
    cfg.quantile_bias = j["quantile_bias"].get<long>();
  }
  if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty()) {
    throw ConfigError(where + ": \"groups\" must be a non-empty array");
  }
  for (const auto& gj : j["groups"]) {
    GroupSpec g;
    if (!gj.is_object() || !gj.contains("label") || !gj["label"].is_string()) {
      throw ConfigError(where + ": every group needs a string \"label\"");
    }
    g.label = gj["label"].get<std::string>();
    if (gj.contains("weight")) g.weight = gj["weight"].get<double>();
    if (gj.contains("claim_count_range")) {
      const auto& range = gj["claim_count_range"];
      if (!range.is_array() || range.size() != 2) {
        throw ConfigError(where + ": group \"" + g.label + "\": claim_count_range must be [min, max]");
      }
      g.claim_count_min = range[0].get<std::size_t>();
      g.claim_count_max = range[1].get<std::size_t>();
    }
    if (gj.contains("factual_prob")) g.factual_prob = gj["factual_prob"].get<double>();
    if (gj.contains("score_separation")) g.score_separation = gj["score_separation"].get<double>();
    cfg.groups.push_back(std::move(g));
  }
  cfg.validate();
  return cfg;
}

inline SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth config \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
  return synth_config_from_json(j, path);
}

inline json coverage_summary_to_json(const CoverageSummary& summary) {
  json per_group = json::object();
  for (const auto& [label, stats] : summary.per_group) {
    per_group[label] = {{"trials", stats.trials},
                        {"mean_factuality", stats.mean_factuality},
                        {"se_factuality", stats.se_factuality}};
  }
  return json{{"alpha", summary.alpha},
              {"mode", calibration_mode_name(summary.mode)},
              {"trials", summary.trials},
              {"mean_factuality", summary.overall.mean_factuality},
              {"se_factuality", summary.overall.se_factuality},
              {"mean_removal", summary.overall.mean_removal},
              {"per_group", std::move(per_group)}};
}

}  // namespace cclaims
