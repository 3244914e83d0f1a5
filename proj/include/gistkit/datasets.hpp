#pragma once

// Corpus files, statistics, splits and the PSW builder.

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gistkit/types.hpp"

namespace gistkit::datasets {

inline constexpr int kSchemaVersion = 1;

enum class Split { kTrain, kValid, kTest };

std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct CorpusManifest {
  std::string name;
  TaskKind task = TaskKind::kLamp5;
  Split split = Split::kTest;
  std::size_t instance_count = 0;
  int schema_version = kSchemaVersion;
  std::string content_hash;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<TaskInstance> instances;
};

/// SHA-256 of the canonical JSON array of instances.
std::string content_hash(const std::vector<TaskInstance>& instances);

/// File layout: {schema_version, name, task, split, content_hash?, instances}.
Json corpus_to_json(const Corpus& corpus);

/// Decodes and validates. Every instance must decode, belong to the corpus
/// task and pass validate_instance (LoadError naming index and field path).
/// A present content_hash must match (IntegrityError).
Corpus corpus_from_json(const Json& json, std::optional<TaskKind> expected_task = std::nullopt);

Corpus load_corpus(const std::string& path, std::optional<TaskKind> expected_task = std::nullopt);

/// Writes atomically with instance_count and content_hash filled in.
void save_corpus(const std::string& path, Corpus corpus);

/// Every problem in a file, without stopping at the first.
std::vector<std::string> validate_corpus_file(const std::string& path);

struct CorpusStats {
  std::size_t papers = 0;
  std::size_t authors = 0;
  double avg_authors_per_paper = 0;
  double avg_history_papers_per_author = 0;
  double avg_title_length = 0;     // code points
  double avg_abstract_length = 0;  // code points
  double avg_refs_per_paper = 0;
  // Present only when the corpus carries the gold fields ("research_interests"
  // on single-author instances, "research_questions" on papers).
  std::optional<double> avg_research_interests_per_author;
  std::optional<double> avg_research_question_length;  // code points, questions concatenated

  bool operator==(const CorpusStats&) const = default;
};

/// Table row labels, in output order.
const std::array<std::string, 9>& stats_row_labels();

/// Throws EmptyCorpus. Title and abstract come from the instance context
/// ("title", "abstract"), falling back to the input/target the task implies;
/// references from "reference_count", else the size of "references".
CorpusStats compute_stats(const Corpus& corpus);

/// "Statistic,<column>" header then one row per label; absent optional
/// statistics print as an empty cell.
std::string stats_csv(const CorpusStats& stats, const std::string& column = "value");
Json stats_to_json(const CorpusStats& stats);
CorpusStats stats_from_json(const Json& json);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

/// Seeded paper-level partition of 0..n-1. Ratios must be non-negative and
/// sum to 1 (within 1e-9). Cut points are floor(n * cumulative ratio), with
/// the last ratio taking the remainder.
SplitIndices split_indices(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// PSW construction from a scholarly index.

struct AuthorRef {
  std::string author_id;  // source identifier; never written to corpus files
  std::string name;
};

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract;
  int year = 0;
  std::vector<AuthorRef> authors;  // in byline order
  std::size_t reference_count = 0;
  std::vector<std::string> reference_titles;
};

/// Source of paper and author records.
class ScholarlyIndex {
 public:
  virtual ~ScholarlyIndex() = default;
  virtual std::vector<PaperRecord> search(const std::string& query, int year_from, int limit) = 0;
  virtual std::vector<PaperRecord> author_papers(const std::string& author_id, int limit) = 0;
  virtual std::vector<std::string> reference_titles(const std::string& paper_id) = 0;
};

/// Minimum spacing between calls, shared by all threads.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}
  void acquire();

 private:
  std::chrono::milliseconds interval_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

/// Semantic Scholar Graph API client (x-api-key header when a key is given).
/// Retries 429/5xx up to `max_attempts` with exponential backoff.
class SemanticScholarClient : public ScholarlyIndex {
 public:
  struct Options {
    std::string base_url = "https://api.semanticscholar.org/graph/v1";
    std::string api_key;
    std::chrono::milliseconds min_interval{1000};
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{1000};
  };

  explicit SemanticScholarClient(Options options);

  /// Reads S2_API_KEY and S2_BASE_URL.
  static Options options_from_env();

  std::vector<PaperRecord> search(const std::string& query, int year_from, int limit) override;
  std::vector<PaperRecord> author_papers(const std::string& author_id, int limit) override;
  std::vector<std::string> reference_titles(const std::string& paper_id) override;

  static PaperRecord parse_paper(const Json& json);

 private:
  Json get(const std::string& path, const std::multimap<std::string, std::string>& params);

  Options options_;
  std::string origin_;
  std::string prefix_;
  RateLimiter limiter_;
};

struct PswBuildOptions {
  std::string query;
  std::string name = "psw";
  int min_year = 2001;
  int max_papers = 100;
  int history_limit = 20;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct PswBuildResult {
  std::vector<std::string> files;              // corpus files written
  std::string private_map_path;                // author_id -> anonymized id
  std::vector<std::string> skipped;            // "paper_id: reason"
  std::vector<std::string> failures;           // API failures after retries
  std::size_t papers = 0;
};

/// Filters papers (>= 2 authors, year >= min_year, non-empty abstract),
/// fetches author histories (excluding the target paper), anonymizes authors
/// to stable first-seen ids, splits at paper level and writes one file per
/// task (psw1, psw3, psw4) and split. PSW-2 and UP-0 need gold fields this
/// source cannot supply and are not emitted.
PswBuildResult build_psw(ScholarlyIndex& index, const PswBuildOptions& options);

}  // namespace gistkit::datasets
