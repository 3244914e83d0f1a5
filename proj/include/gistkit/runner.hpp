#pragma once

// Orchestrates (task x setting x ablation) runs and renders their reports.

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gistkit/datasets.hpp"
#include "gistkit/gisting.hpp"
#include "gistkit/llm.hpp"
#include "gistkit/metrics.hpp"
#include "gistkit/types.hpp"

namespace gistkit::runner {

// --- published reference numbers ---------------------------------------------

struct ReferenceEntry {
  std::string source;  // e.g. "lamp_main", "psw_author_order"
  std::string method;  // e.g. "ours", "chatgpt_non_personalized"
  TaskKind task = TaskKind::kLamp1;
  Setting setting = Setting::kSingleAuthor;
  Ablation ablation = Ablation::kNone;
  std::map<std::string, double> metrics;
};

struct ReferenceTable {
  std::vector<ReferenceEntry> entries;

  bool empty() const { return entries.empty(); }
};

ReferenceTable reference_from_json(const Json& json);
ReferenceTable load_reference(const std::string& path);

struct ComparisonRow {
  std::string source;
  std::string method;
  std::string task;
  std::string setting;
  std::string ablation;
  std::string metric;
  std::optional<double> ours;
  double reference = 0;
  std::optional<double> delta;  // ours - reference
};

/// Reference rows for one run, joined with the run's summary metrics. LaMP
/// tasks have one author, so single_author and multi_author runs both match
/// the LaMP rows. Pass an empty summary to list the reference rows alone.
std::vector<ComparisonRow> compare(TaskKind task, Setting setting, Ablation ablation,
                                   const std::map<std::string, double>& summary,
                                   const ReferenceTable& reference);

/// Every reference row, optionally restricted to one task.
std::vector<ComparisonRow> reference_rows(const ReferenceTable& reference,
                                          std::optional<TaskKind> task = std::nullopt);

std::string render_comparison(const std::vector<ComparisonRow>& rows);
Json comparison_to_json(const std::vector<ComparisonRow>& rows);

// --- reports ------------------------------------------------------------------

struct PromptRecord {
  std::string template_id;
  std::vector<std::string> sections;
  std::string binding_hash;
  std::string prompt_hash;  // SHA-256 of the user prompt text
  std::string text;
};

struct InstanceArtifact {
  std::string instance_id;
  std::string error;   // empty on success
  std::string stage;   // stage that failed
  std::vector<std::string> author_order;
  std::map<std::string, std::string> profile_sources;  // author -> profile owner, "" when removed
  std::string profile_fingerprint;
  std::string composed_profile;
  std::vector<std::vector<std::string>> retrieved;  // per author, "user#entry" ids
  PromptRecord prompt;
  std::string request_key;
  std::string response_hash;
  std::string prediction;
  std::string reference;
  std::map<std::string, double> metrics;
  std::vector<std::string> judge_request_keys;
  std::vector<std::string> warnings;
  bool cached = false;  // run_meta only

  bool ok() const { return error.empty(); }
};

struct EvalReport {
  TaskKind task = TaskKind::kLamp5;
  RunConfig config;
  datasets::CorpusManifest corpus;
  std::string backend;
  metrics::MetricTable metrics;
  std::vector<InstanceArtifact> instances;  // sorted by instance id
  std::size_t errors = 0;
  bool failed = false;
  std::vector<ComparisonRow> comparison;  // rows from the reference table joined with this run

  // Run metadata kept out of report.json so identical runs compare equal.
  std::string started_at;
  long wall_clock_ms = 0;
  std::uint64_t provider_calls = 0;

  /// Deterministic: no wall-clock, cache paths or cache-hit flags.
  Json to_json() const;
  Json meta_json() const;
  /// Human-readable summary table.
  std::string render() const;
};

EvalReport report_from_json(const Json& json);

struct RunOptions {
  std::optional<ReferenceTable> reference;
};

/// Runs one (task, setting, ablation) over a corpus. Per-instance failures
/// are recorded on the artifact; `failed` is set when the error fraction
/// exceeds config.failure_threshold. Invalid configurations throw
/// ContractViolation.
EvalReport run(const datasets::Corpus& corpus, const RunConfig& config, llm::Gateway& gateway,
               const RunOptions& options = {});

/// The five variants in ablation order, all with setting multi_author.
std::vector<EvalReport> ablate(const datasets::Corpus& corpus, RunConfig config,
                               llm::Gateway& gateway, const RunOptions& options = {});

/// reports/<task>/<setting>/<ablation>/<timestamp>
std::string default_report_dir(const std::string& root, const EvalReport& report);

/// Writes report.json, report.txt, metrics.csv and run_meta.json; returns
/// the report.json path.
std::string write_report(const EvalReport& report, const std::string& dir);

/// Profiles every distinct corpus user (first history seen for each user).
/// Uses and fills the profile store under <cache_dir>/profiles unless
/// `refresh` is set.
std::vector<gisting::GistResult> gist_corpus(const datasets::Corpus& corpus, const RunConfig& config,
                                             llm::Gateway& gateway, bool refresh = false);

}  // namespace gistkit::runner
