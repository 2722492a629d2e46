// conformal-claims: calibrate a conformal threshold on labeled RAG outputs,
// filter test-time answers with it, and validate the coverage guarantee.
//
// Subcommands: calibrate, infer, evaluate, sweep, synth-coverage,
// embed-corpus. Exit codes: 0 success, 1 runtime or bound failure,
// 2 usage/config error.
//
// External credentials come only from environment variables
// (CONFORMAL_CLAIMS_API_KEY by default); endpoints may also default from
// CONFORMAL_CLAIMS_API_BASE. Flags always win over config-file values,
// which win over built-in defaults.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cclaims/cclaims.hpp"
#include "cclaims/http_backend.hpp"

namespace {

using cclaims::json;

constexpr const char* kApiBaseEnv = "CONFORMAL_CLAIMS_API_BASE";
constexpr const char* kApiKeyEnv = "CONFORMAL_CLAIMS_API_KEY";

// Everything a subcommand might need; each subcommand registers only the
// flags it uses, and unset strings keep their defaults.
struct Options {
  std::string data;
  std::string calibration_data;
  std::string test_data;
  std::string calibration_path;
  std::string out;
  std::string csv_out;
  std::string embeddings_path;

  double alpha = 0.1;
  std::string alphas_spec;
  std::string mode = "marginal";
  std::string group_policy = "strict";

  std::string provider = "hashed_tf";
  std::size_t dim = 256;
  std::string embed_endpoint;
  std::string embed_model;

  std::string annotator = "oracle";
  double overlap_threshold = 0.6;
  std::string judge_endpoint;
  std::string judge_model;
  std::string judge_prompt_file;

  std::string decompose_backend = "sentence_split";
  std::string merge_backend = "concatenate";

  std::uint64_t seed = 42;
  std::size_t concurrency = 0;

  // synth-coverage
  std::string synth_config_path;
  std::size_t trials_override = 0;
  bool seed_given = false;
  long quantile_bias = 0;
};

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

void require_alpha_range(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw cclaims::ConfigError("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cclaims::ConfigError("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw cclaims::DataError("cannot write \"" + path + "\"");
  out << content;
}

// "0.05:0.40:0.05" (inclusive range) or "0.1,0.2,0.3". Returns ascending,
// deduplicated values, all inside (0,1).
std::vector<double> parse_alphas(const std::string& spec) {
  std::vector<double> alphas;
  if (spec.find(':') != std::string::npos) {
    double lo = 0.0, hi = 0.0, step = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0)) {
      throw cclaims::ConfigError("bad alpha range \"" + spec + "\" (expected lo:hi:step)");
    }
    for (int k = 0;; ++k) {
      double a = lo + step * k;
      if (a > hi + step * 1e-9) break;
      alphas.push_back(a);
    }
  } else {
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        std::size_t pos = 0;
        double a = std::stod(item, &pos);
        if (pos != item.size()) throw std::invalid_argument(item);
        alphas.push_back(a);
      } catch (const std::exception&) {
        throw cclaims::ConfigError("bad alpha value \"" + item + "\"");
      }
    }
  }
  if (alphas.empty()) throw cclaims::ConfigError("empty alpha list");
  for (double a : alphas) require_alpha_range(a);
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  return alphas;
}

cclaims::EmbeddingProviderConfig provider_config(const Options& opt) {
  cclaims::EmbeddingProviderConfig cfg;
  cfg.kind = cclaims::provider_kind_from_name(opt.provider);
  cfg.dim = opt.dim;
  cfg.credential_env = kApiKeyEnv;
  if (cfg.kind == cclaims::EmbeddingProviderKind::external_http) {
    cfg.endpoint = opt.embed_endpoint.empty() ? env_or_empty(kApiBaseEnv) + "/v1/embeddings"
                                              : opt.embed_endpoint;
    if (opt.embed_endpoint.empty() && env_or_empty(kApiBaseEnv).empty()) {
      throw cclaims::ConfigError("external_http provider: set --embed-endpoint or " +
                                 std::string(kApiBaseEnv));
    }
    cfg.model = opt.embed_model;
  }
  cfg.validate();
  return cfg;
}

cclaims::AnnotatorConfig annotator_config(const Options& opt) {
  cclaims::AnnotatorConfig cfg;
  cfg.kind = cclaims::annotator_kind_from_name(opt.annotator);
  cfg.overlap_threshold = opt.overlap_threshold;
  cfg.credential_env = kApiKeyEnv;
  if (cfg.kind == cclaims::AnnotatorKind::external_llm) {
    cfg.endpoint = opt.judge_endpoint.empty()
                       ? env_or_empty(kApiBaseEnv) + "/v1/chat/completions"
                       : opt.judge_endpoint;
    if (opt.judge_endpoint.empty() && env_or_empty(kApiBaseEnv).empty()) {
      throw cclaims::ConfigError("external_llm annotator: set --judge-endpoint or " +
                                 std::string(kApiBaseEnv));
    }
    cfg.model = opt.judge_model;
  }
  if (!opt.judge_prompt_file.empty()) cfg.prompt_template = read_text_file(opt.judge_prompt_file);
  cfg.validate();
  return cfg;
}

cclaims::PipelineConfig pipeline_config(const Options& opt) {
  cclaims::PipelineConfig cfg;
  cfg.annotator = annotator_config(opt);
  cfg.decompose_backend = cclaims::decompose_backend_from_name(opt.decompose_backend);
  cfg.merge_backend = cclaims::merge_backend_from_name(opt.merge_backend);
  cfg.policy = cclaims::group_policy_from_name(opt.group_policy);
  cfg.concurrency = opt.concurrency;
  return cfg;
}

// The effective configuration of a run, echoed to stdout and embedded in
// artifacts whose schema this tool owns. Secrets never appear here: only
// the NAMES of credential variables are recorded.
json config_echo(const std::string& command, const Options& opt) {
  json j{{"command", command},
         {"provider", opt.provider},
         {"annotator", opt.annotator},
         {"decompose", opt.decompose_backend},
         {"merge", opt.merge_backend},
         {"group_policy", opt.group_policy},
         {"seed", opt.seed},
         {"concurrency", opt.concurrency},
         {"credential_env", kApiKeyEnv}};
  if (opt.provider == "hashed_tf") j["dim"] = opt.dim;
  if (!opt.embed_endpoint.empty()) j["embed_endpoint"] = opt.embed_endpoint;
  if (!opt.embed_model.empty()) j["embed_model"] = opt.embed_model;
  if (opt.annotator == "overlap") j["overlap_threshold"] = opt.overlap_threshold;
  if (!opt.judge_endpoint.empty()) j["judge_endpoint"] = opt.judge_endpoint;
  if (!opt.judge_model.empty()) j["judge_model"] = opt.judge_model;
  return j;
}

struct Backends {
  std::unique_ptr<cclaims::Embedder> embedder;
  std::unique_ptr<cclaims::ChatCompleter> judge;
  std::unique_ptr<cclaims::ChatCompleter> rewriter;
  std::optional<cclaims::EmbeddingStore> store;
};

Backends make_backends(const Options& opt, const cclaims::PipelineConfig& cfg) {
  Backends b;
  b.embedder = cclaims::make_embedder(provider_config(opt));
  b.judge = cclaims::make_judge_backend(cfg.annotator);
  const bool needs_rewriter = cfg.decompose_backend == cclaims::DecomposeBackend::external_llm ||
                              cfg.merge_backend == cclaims::MergeBackend::external_llm;
  if (needs_rewriter) {
    std::string endpoint = opt.judge_endpoint.empty()
                               ? env_or_empty(kApiBaseEnv) + "/v1/chat/completions"
                               : opt.judge_endpoint;
    if (opt.judge_endpoint.empty() && env_or_empty(kApiBaseEnv).empty()) {
      throw cclaims::ConfigError("external_llm decompose/merge: set --judge-endpoint or " +
                                 std::string(kApiBaseEnv));
    }
    if (opt.judge_model.empty()) {
      throw cclaims::ConfigError("external_llm decompose/merge: set --judge-model");
    }
    b.rewriter = std::make_unique<cclaims::HttpChatCompleter>(endpoint, opt.judge_model, kApiKeyEnv);
  }
  if (!opt.embeddings_path.empty()) b.store = cclaims::load_embedding_store(opt.embeddings_path);
  return b;
}

cclaims::CalibrationMode mode_of(const cclaims::CalibrationResult& calib) {
  return calib.per_group.empty() ? cclaims::CalibrationMode::marginal
                                 : cclaims::CalibrationMode::mondrian;
}

// --- Subcommands -------------------------------------------------------------

int cmd_calibrate(const Options& opt) {
  require_alpha_range(opt.alpha);
  cclaims::CalibrationMode mode = cclaims::calibration_mode_from_name(opt.mode);
  cclaims::PipelineConfig cfg = pipeline_config(opt);
  Backends b = make_backends(opt, cfg);

  std::cout << "config: " << config_echo("calibrate", opt).dump() << "\n";
  cclaims::CalibrationResult calib = cclaims::run_calibration(
      opt.data, opt.alpha, mode, cfg, *b.embedder, b.judge.get(), b.rewriter.get(),
      b.store ? &*b.store : nullptr);
  cclaims::save_calibration(opt.out, calib);

  std::cout << "calibrated on " << calib.n << " records at alpha " << opt.alpha
            << ": marginal threshold " << calib.marginal_q.str() << "\n";
  for (const auto& [label, gc] : calib.per_group) {
    std::cout << "  group " << label << ": threshold " << gc.q.str() << " (n=" << gc.n << ")\n";
  }
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int cmd_infer(const Options& opt) {
  cclaims::PipelineConfig cfg = pipeline_config(opt);
  Backends b = make_backends(opt, cfg);
  cclaims::CalibrationResult calib = cclaims::load_calibration(opt.calibration_path);

  std::cout << "config: " << config_echo("infer", opt).dump() << "\n";
  std::vector<cclaims::InferenceResult> results = cclaims::run_inference(
      opt.data, calib, cfg, *b.embedder, b.rewriter.get(), b.store ? &*b.store : nullptr);

  std::string out;
  std::size_t retained = 0, total = 0;
  for (const auto& r : results) {
    out += cclaims::inference_to_json(r).dump();
    out += '\n';
    retained += r.outcome.retained.size();
    total += r.outcome.retained.size() + r.outcome.removed.size();
  }
  write_text_file(opt.out, out);
  std::cout << "filtered " << results.size() << " records: retained " << retained << "/" << total
            << " claims\n";
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int cmd_evaluate(const Options& opt) {
  cclaims::PipelineConfig cfg = pipeline_config(opt);
  Backends b = make_backends(opt, cfg);
  cclaims::CalibrationResult calib = cclaims::load_calibration(opt.calibration_path);
  cclaims::CalibrationMode mode = mode_of(calib);

  std::cout << "config: " << config_echo("evaluate", opt).dump() << "\n";
  std::vector<cclaims::AnswerRecord> records =
      cclaims::load_dataset(opt.data, cclaims::Split::test, b.store ? &*b.store : nullptr);
  std::vector<cclaims::InferenceResult> results =
      cclaims::run_inference(records, calib, cfg, *b.embedder, b.rewriter.get());
  cclaims::EvaluationReport report = cclaims::evaluate(results, records, calib.alpha, mode);

  json out = cclaims::report_to_json(report);
  out["config"] = config_echo("evaluate", opt);
  write_text_file(opt.out, out.dump(2) + "\n");
  if (!opt.csv_out.empty()) write_text_file(opt.csv_out, cclaims::reports_to_csv({report}));

  std::cout << "evaluated " << report.n_test << " records at alpha " << calib.alpha
            << ": factuality " << cclaims::format_number(report.empirical_factuality)
            << ", removal " << cclaims::format_number(report.removal_rate) << "\n";
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int cmd_sweep(const Options& opt) {
  std::vector<double> alphas = parse_alphas(opt.alphas_spec);
  cclaims::CalibrationMode mode = cclaims::calibration_mode_from_name(opt.mode);
  cclaims::PipelineConfig cfg = pipeline_config(opt);
  Backends b = make_backends(opt, cfg);

  std::cout << "config: " << config_echo("sweep", opt).dump() << "\n";
  const cclaims::EmbeddingStore* store = b.store ? &*b.store : nullptr;
  cclaims::Split strictness = cfg.annotator.kind == cclaims::AnnotatorKind::oracle
                                  ? cclaims::Split::calibration
                                  : cclaims::Split::test;
  std::vector<cclaims::AnswerRecord> calibration =
      cclaims::load_dataset(opt.calibration_data, strictness, store);
  std::vector<cclaims::AnswerRecord> test =
      cclaims::load_dataset(opt.test_data, cclaims::Split::test, store);

  std::vector<cclaims::EvaluationReport> reports = cclaims::run_sweep(
      std::move(calibration), std::move(test), alphas, mode, cfg, *b.embedder, b.judge.get(),
      b.rewriter.get());
  write_text_file(opt.out, cclaims::reports_to_csv(reports));

  std::cout << "swept " << alphas.size() << " alpha values over " << reports.front().n_test
            << " test records\n";
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int cmd_synth_coverage(const Options& opt) {
  require_alpha_range(opt.alpha);
  cclaims::CalibrationMode mode = cclaims::calibration_mode_from_name(opt.mode);
  cclaims::SynthConfig cfg = cclaims::load_synth_config(opt.synth_config_path);
  if (opt.trials_override > 0) cfg.trials = opt.trials_override;
  if (opt.seed_given) cfg.seed = opt.seed;
  if (opt.quantile_bias != 0) cfg.quantile_bias = opt.quantile_bias;
  cfg.validate();

  std::cout << "config: " << config_echo("synth-coverage", opt).dump() << "\n";
  cclaims::CoverageSummary summary = cclaims::run_coverage(cfg, opt.alpha, mode, opt.concurrency);

  json out = cclaims::coverage_summary_to_json(summary);
  out["config"] = config_echo("synth-coverage", opt);
  out["config"]["synth"] = {{"seed", cfg.seed},
                            {"n_calibration", cfg.n_calibration},
                            {"n_test", cfg.n_test},
                            {"trials", cfg.trials}};
  if (!opt.out.empty()) write_text_file(opt.out, out.dump(2) + "\n");

  std::cout << "coverage over " << cfg.trials << " trials at alpha " << opt.alpha << " ("
            << cclaims::calibration_mode_name(mode)
            << "): mean factuality " << cclaims::format_number(summary.overall.mean_factuality)
            << " (se " << cclaims::format_number(summary.overall.se_factuality) << "), removal "
            << cclaims::format_number(summary.overall.mean_removal) << "\n";
  for (const auto& [label, stats] : summary.per_group) {
    std::cout << "  group " << label << ": mean factuality "
              << cclaims::format_number(stats.mean_factuality) << " (se "
              << cclaims::format_number(stats.se_factuality) << ")\n";
  }
  if (!opt.out.empty()) std::cout << "wrote " << opt.out << "\n";

  std::vector<std::string> violations = cclaims::check_coverage_bounds(summary, cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "coverage bound violated: " << v << "\n";
    return 1;
  }
  std::cout << "coverage bounds hold\n";
  return 0;
}

int cmd_embed_corpus(const Options& opt) {
  cclaims::EmbeddingProviderConfig provider = provider_config(opt);
  std::unique_ptr<cclaims::Embedder> embedder = cclaims::make_embedder(provider);

  std::cout << "config: " << config_echo("embed-corpus", opt).dump() << "\n";
  std::vector<cclaims::AnswerRecord> records =
      cclaims::load_dataset(opt.data, cclaims::Split::test);

  // First occurrence wins; a repeated id must carry identical text, since
  // the output store is keyed by id alone.
  std::vector<std::pair<std::string, std::string>> items;  // (id, text)
  std::unordered_map<std::string, std::string> seen;
  auto add = [&](const std::string& id, const std::string& text) {
    auto [it, inserted] = seen.emplace(id, text);
    if (!inserted) {
      if (it->second != text) {
        throw cclaims::DataError("id \"" + id + "\" appears with two different texts; "
                                 "embedding stores need globally unique ids");
      }
      return;
    }
    items.emplace_back(id, text);
  };
  for (const auto& r : records) {
    add(r.query.id, r.query.text);
    for (const auto& d : r.documents) add(d.id, d.text);
    for (const auto& c : r.claims) add(c.id, c.text);
  }

  std::string out;
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < items.size(); start += kBatch) {
    std::size_t end = std::min(items.size(), start + kBatch);
    std::vector<std::string> texts;
    texts.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) texts.push_back(items[i].second);
    std::vector<cclaims::Embedding> vectors = embedder->embed_batch(texts);
    for (std::size_t i = start; i < end; ++i) {
      out += json{{"id", items[i].first}, {"embedding", vectors[i - start]}}.dump();
      out += '\n';
    }
  }
  write_text_file(opt.out, out);
  std::cout << "embedded " << items.size() << " unique items from " << records.size()
            << " records\n";
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

// --- Flag registration ---------------------------------------------------------

void add_provider_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--provider", opt.provider, "Embedding provider: hashed_tf or external_http")
      ->capture_default_str();
  sub->add_option("--dim", opt.dim, "hashed_tf embedding dimension (min 16)")
      ->capture_default_str();
  sub->add_option("--embed-endpoint", opt.embed_endpoint,
                  "external_http embeddings URL (default: $CONFORMAL_CLAIMS_API_BASE/v1/embeddings)");
  sub->add_option("--embed-model", opt.embed_model, "external_http embedding model name");
  sub->add_option("--embeddings", opt.embeddings_path,
                  "JSONL embedding store resolved by item id (inline embeddings win)");
}

void add_annotator_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--annotator", opt.annotator, "Annotator: oracle, overlap, or external_llm")
      ->capture_default_str();
  sub->add_option("--overlap-threshold", opt.overlap_threshold,
                  "overlap annotator: min fraction of claim tokens found in ground truth + documents")
      ->capture_default_str();
  sub->add_option("--judge-endpoint", opt.judge_endpoint,
                  "external_llm chat URL (default: $CONFORMAL_CLAIMS_API_BASE/v1/chat/completions)");
  sub->add_option("--judge-model", opt.judge_model, "external_llm judge model name");
  sub->add_option("--judge-prompt-file", opt.judge_prompt_file,
                  "override the built-in judge prompt template");
}

void add_shared_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--decompose", opt.decompose_backend,
                  "Claim decomposition: sentence_split or external_llm")
      ->capture_default_str();
  sub->add_option("--merge", opt.merge_backend, "Answer merging: concatenate or external_llm")
      ->capture_default_str();
  sub->add_option("--group-policy", opt.group_policy,
                  "Unknown-group handling: strict or fallback_marginal")
      ->capture_default_str();
  sub->add_option("--seed", opt.seed, "Random seed (synthetic data only; local runs are deterministic)")
      ->capture_default_str();
  sub->add_option("--concurrency", opt.concurrency,
                  "Max concurrent records/trials (0 = hardware parallelism)")
      ->capture_default_str();
  sub->set_config("--config", "", "Read default flag values from a TOML/INI file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal calibration and filtering for claim-decomposed RAG answers"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Score + annotate labeled records and calibrate a threshold");
  calibrate->add_option("--data", opt.data, "Calibration dataset (JSONL)")->required();
  calibrate->add_option("--alpha", opt.alpha, "Target error rate in (0,1)")->capture_default_str();
  calibrate->add_option("--mode", opt.mode, "marginal or mondrian")->capture_default_str();
  calibrate->add_option("--out", opt.out, "Output calibration JSON")->required();
  add_provider_flags(calibrate, opt);
  add_annotator_flags(calibrate, opt);
  add_shared_flags(calibrate, opt);

  CLI::App* infer = app.add_subcommand("infer", "Filter answers with a calibrated threshold");
  infer->add_option("--data", opt.data, "Test dataset (JSONL, labels not needed)")->required();
  infer->add_option("--calibration", opt.calibration_path, "Calibration JSON")->required();
  infer->add_option("--out", opt.out, "Output JSONL of filtered answers")->required();
  add_provider_flags(infer, opt);
  add_shared_flags(infer, opt);

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Filter a labeled test set and score factuality/removal");
  evaluate->add_option("--data", opt.data, "Labeled test dataset (JSONL)")->required();
  evaluate->add_option("--calibration", opt.calibration_path, "Calibration JSON")->required();
  evaluate->add_option("--out", opt.out, "Output report JSON")->required();
  evaluate->add_option("--csv", opt.csv_out, "Also write the report as CSV");
  add_provider_flags(evaluate, opt);
  add_shared_flags(evaluate, opt);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Calibrate + evaluate across alpha values; one CSV row per (alpha, group)");
  sweep->add_option("--calibration-data", opt.calibration_data, "Calibration dataset (JSONL)")
      ->required();
  sweep->add_option("--test-data", opt.test_data, "Labeled test dataset (JSONL)")->required();
  sweep->add_option("--alphas", opt.alphas_spec, "Comma list (0.1,0.2) or range lo:hi:step")
      ->required();
  sweep->add_option("--mode", opt.mode, "marginal or mondrian")->capture_default_str();
  sweep->add_option("--out", opt.out, "Output CSV path")->required();
  add_provider_flags(sweep, opt);
  add_annotator_flags(sweep, opt);
  add_shared_flags(sweep, opt);

  CLI::App* synth = app.add_subcommand(
      "synth-coverage", "Monte Carlo check of the coverage guarantee on synthetic data");
  synth->add_option("--config", opt.synth_config_path, "Synthetic population config (JSON)")
      ->required();
  synth->add_option("--alpha", opt.alpha, "Target error rate in (0,1)")->capture_default_str();
  synth->add_option("--mode", opt.mode, "marginal or mondrian")->capture_default_str();
  synth->add_option("--out", opt.out, "Output summary JSON");
  synth->add_option("--trials", opt.trials_override, "Override the config's trial count");
  synth->add_option("--seed", opt.seed, "Override the config's seed");
  synth->add_option("--concurrency", opt.concurrency,
                    "Max concurrent trials (0 = hardware parallelism)")
      ->capture_default_str();
  synth->add_option("--quantile-bias", opt.quantile_bias,
                    "Shift the quantile index (self-test corruption hook)")
      ->group("");  // hidden

  CLI::App* embed = app.add_subcommand(
      "embed-corpus", "Embed every unique item in a dataset into a JSONL store");
  embed->add_option("--data", opt.data, "Dataset (JSONL)")->required();
  embed->add_option("--out", opt.out, "Output embedding store (JSONL)")->required();
  add_provider_flags(embed, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.seed_given = synth->count("--seed") > 0;

  try {
    if (calibrate->parsed()) return cmd_calibrate(opt);
    if (infer->parsed()) return cmd_infer(opt);
    if (evaluate->parsed()) return cmd_evaluate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (synth->parsed()) return cmd_synth_coverage(opt);
    if (embed->parsed()) return cmd_embed_corpus(opt);
  } catch (const cclaims::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cclaims::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
