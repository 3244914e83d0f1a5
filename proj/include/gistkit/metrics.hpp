#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gistkit/types.hpp"

namespace gistkit::metrics {

/// Token options shared by both ROUGE variants.
struct RougeOptions {
  bool stem = false;
};

/// Unigram-overlap F1. Both texts empty after tokenization gives 1, exactly
/// one empty gives 0.
double rouge1(std::string_view candidate, std::string_view reference, RougeOptions options = {});

/// LCS-based F1 with the same tokenizer and empty conventions as rouge1.
double rougeL(std::string_view candidate, std::string_view reference, RougeOptions options = {});

/// Dynamic-programming longest common subsequence length.
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Exact-match fraction. Throws ContractViolation on length mismatch or empty input.
double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& refs);

/// Unweighted mean of per-class F1 over classes seen in refs or preds.
double f1_macro(const std::vector<std::string>& preds, const std::vector<std::string>& refs);

double mae(const std::vector<double>& preds, const std::vector<double>& refs);
double rmse(const std::vector<double>& preds, const std::vector<double>& refs);

/// First standalone digit 1-5 in the text, or nullopt.
std::optional<int> parse_rating(std::string_view text);

struct RatingParse {
  int value = 3;
  bool fallback = false;  // the text held no rating
};

/// parse_rating, falling back to `most_common` (else 3) and flagging it.
RatingParse rating_or_fallback(std::string_view text, std::optional<int> most_common);

/// Maps a LaMP-1 reply ("[2]", "2", "Reference 2") to a candidate, or the
/// trimmed reply when it names none.
std::string parse_citation_choice(std::string_view text, const std::vector<std::string>& candidates);

/// Maps a LaMP-2 reply to the candidate it names (case-insensitive, longest
/// match wins), or the trimmed reply.
std::string parse_category(std::string_view text, const std::vector<std::string>& candidates);

struct GevalScores {
  double consistency = 0;
  double fluency = 0;
  double relevance = 0;
  double novelty = 0;
  std::string raw_judge_text;
  std::vector<std::string> warnings;  // one per clamped score or fallback parse

  bool clamped() const;
};

/// Reads the four scores from the first balanced JSON object holding them,
/// falling back to "Name: value" lines. Out-of-range scores are clamped to
/// Consistency/Relevance 1-5 and Fluency/Novelty 1-3 with a warning. Throws
/// JudgeParseError (carrying the raw text) when a score is missing.
GevalScores parse_geval(std::string_view judge_text);

/// Mean over samples (used when several judge calls score one instance).
GevalScores average_geval(const std::vector<GevalScores>& samples);

/// Per-instance metric rows, with aggregate means and corpus-level metrics
/// (rmse, f1_macro) that are not means of per-instance values.
class MetricTable {
 public:
  void add(const std::string& instance_id, const std::string& metric, double value);
  void set_corpus_metric(const std::string& metric, double value);

  const std::vector<std::string>& instance_ids() const { return order_; }
  std::optional<double> value(const std::string& instance_id, const std::string& metric) const;
  std::vector<std::string> metric_names() const;
  const std::map<std::string, double>& corpus_metrics() const { return corpus_; }

  /// Arithmetic mean of the present per-instance values of each metric.
  std::map<std::string, double> aggregate() const;
  std::map<std::string, std::size_t> counts() const;

  /// aggregate() overlaid with corpus metrics.
  std::map<std::string, double> summary() const;

  Json to_json() const;
  /// One row per instance, then an "aggregate" row. Absent cells are blank.
  std::string to_csv() const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::map<std::string, double>> rows_;
  std::map<std::string, double> corpus_;
};

}  // namespace gistkit::metrics
