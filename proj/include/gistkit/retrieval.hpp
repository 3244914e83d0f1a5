#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gistkit/types.hpp"

namespace gistkit::retrieval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct RetrievedSnippet {
  std::string source_user;
  std::size_t entry_index = 0;  // position in the source history
  HistoryEntry entry;
  double score = 0.0;
  int rank = 0;  // 1-based

  /// "<user>#<entry index>", used in reports.
  std::string id() const { return source_user + "#" + std::to_string(entry_index); }
};

enum class RetrieverKind { kBm25, kDense };

/// Text indexed for one history entry: input and output joined by a space.
std::string document_text(const HistoryEntry& entry);

/// Inverted BM25 index over one user's history. Immutable once built;
/// retrieve() is const and safe to call concurrently.
class Bm25Index {
 public:
  static Bm25Index build(const UserHistory& history, Bm25Params params = {});

  const std::string& user_id() const { return user_id_; }
  const Bm25Params& params() const { return params_; }
  std::size_t document_count() const { return lengths_.size(); }
  std::size_t document_length(std::size_t doc) const { return lengths_.at(doc); }
  std::size_t document_frequency(const std::string& term) const;
  std::size_t term_frequency(std::size_t doc, const std::string& term) const;
  double average_length() const { return average_length_; }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); always positive.
  double idf(const std::string& term) const;

  /// Top-k entries by BM25 against the tokenized query. Documents sharing no
  /// term with the query are never returned, so the result may be shorter
  /// than k. Ties keep ascending entry order. Negative k is a contract
  /// violation.
  std::vector<RetrievedSnippet> retrieve(std::string_view query, int k) const;

  Json to_json() const;
  static Bm25Index from_json(const Json& json);

 private:
  struct Posting {
    std::size_t doc;
    int tf;
  };

  std::string user_id_;
  Bm25Params params_;
  std::vector<HistoryEntry> entries_;
  std::vector<std::size_t> lengths_;
  std::map<std::string, std::vector<Posting>> postings_;
  double average_length_ = 0.0;

  void finalize();
};

/// Builds an index of the requested kind. Only BM25 is available; the dense
/// slot throws NotImplemented.
Bm25Index build_index(const UserHistory& history, RetrieverKind kind = RetrieverKind::kBm25);

/// One retrieve() per author over their own history, in the given author
/// order. Throws ContractViolation naming any author without a history.
std::vector<std::vector<RetrievedSnippet>> retrieve_multi(
    const std::map<std::string, UserHistory>& histories, const std::vector<AuthorRole>& authors,
    std::string_view query, int k);

}  // namespace gistkit::retrieval
