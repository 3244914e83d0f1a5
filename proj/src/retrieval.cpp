#include "gistkit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gistkit/errors.hpp"
#include "gistkit/text.hpp"

namespace gistkit::retrieval {

std::string document_text(const HistoryEntry& entry) { return entry.input + " " + entry.output; }

Bm25Index Bm25Index::build(const UserHistory& history, Bm25Params params) {
  Bm25Index index;
  index.user_id_ = history.user_id;
  index.params_ = params;
  index.entries_ = history.entries;
  for (std::size_t doc = 0; doc < history.entries.size(); ++doc) {
    const auto tokens = tokenize(document_text(history.entries[doc]));
    index.lengths_.push_back(tokens.size());
    std::map<std::string, int> counts;
    for (const auto& token : tokens) ++counts[token];
    for (const auto& [term, tf] : counts) index.postings_[term].push_back({doc, tf});
  }
  index.finalize();
  return index;
}

void Bm25Index::finalize() {
  if (lengths_.empty()) {
    average_length_ = 0.0;
    return;
  }
  std::size_t total = 0;
  for (auto length : lengths_) total += length;
  average_length_ = static_cast<double>(total) / static_cast<double>(lengths_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

std::size_t Bm25Index::term_frequency(std::size_t doc, const std::string& term) const {
  auto it = postings_.find(term);
  if (it == postings_.end()) return 0;
  for (const auto& posting : it->second) {
    if (posting.doc == doc) return static_cast<std::size_t>(posting.tf);
  }
  return 0;
}

double Bm25Index::idf(const std::string& term) const {
  const auto n = static_cast<double>(document_count());
  const auto df = static_cast<double>(document_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<RetrievedSnippet> Bm25Index::retrieve(std::string_view query, int k) const {
  if (k < 0) throw ContractViolation("retrieve: k must be non-negative, got " + std::to_string(k));
  if (k == 0 || lengths_.empty()) return {};

  // Distinct query terms in lexicographic order; the summation order is fixed
  // so identical documents produce bit-identical scores.
  const auto tokens = tokenize(query);
  const std::set<std::string> terms(tokens.begin(), tokens.end());

  std::map<std::size_t, double> scores;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double term_idf = idf(term);
    for (const auto& posting : it->second) {
      const double tf = posting.tf;
      const double norm = average_length_ > 0.0
                              ? 1.0 - params_.b +
                                    params_.b * static_cast<double>(lengths_[posting.doc]) /
                                        average_length_
                              : 1.0;
      scores[posting.doc] += term_idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * norm);
    }
  }

  std::vector<std::pair<std::size_t, double>> ranked(scores.begin(), scores.end());
  std::erase_if(ranked, [](const auto& item) { return !(item.second > 0.0); });
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));

  std::vector<RetrievedSnippet> out;
  out.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out.push_back({user_id_, ranked[i].first, entries_[ranked[i].first], ranked[i].second,
                   static_cast<int>(i + 1)});
  }
  return out;
}

Json Bm25Index::to_json() const {
  Json documents = Json::array();
  for (std::size_t doc = 0; doc < entries_.size(); ++doc) {
    Json tf = Json::object();
    for (const auto& [term, postings] : postings_) {
      for (const auto& posting : postings) {
        if (posting.doc == doc) tf[term] = posting.tf;
      }
    }
    documents.push_back({{"entry", gistkit::to_json(entries_[doc])},
                         {"length", lengths_[doc]},
                         {"tf", std::move(tf)}});
  }
  Json df = Json::object();
  for (const auto& [term, postings] : postings_) df[term] = postings.size();
  return {
      {"kind", "bm25"},
      {"user_id", user_id_},
      {"params", {{"k1", params_.k1}, {"b", params_.b}}},
      {"documents", std::move(documents)},
      {"df", std::move(df)},
  };
}

Bm25Index Bm25Index::from_json(const Json& json) {
  if (json.value("kind", "") != "bm25") throw ContractViolation("not a serialized bm25 index");
  Bm25Index index;
  index.user_id_ = json.at("user_id").get<std::string>();
  index.params_.k1 = json.at("params").at("k1").get<double>();
  index.params_.b = json.at("params").at("b").get<double>();
  const Json& documents = json.at("documents");
  for (std::size_t doc = 0; doc < documents.size(); ++doc) {
    index.entries_.push_back(history_entry_from_json(documents[doc].at("entry")));
    index.lengths_.push_back(documents[doc].at("length").get<std::size_t>());
    for (const auto& [term, tf] : documents[doc].at("tf").items()) {
      index.postings_[term].push_back({doc, tf.get<int>()});
    }
  }
  for (const auto& [term, df] : json.at("df").items()) {
    if (index.document_frequency(term) != df.get<std::size_t>()) {
      throw IntegrityError("serialized bm25 index has inconsistent df for '" + term + "'");
    }
  }
  index.finalize();
  return index;
}

Bm25Index build_index(const UserHistory& history, RetrieverKind kind) {
  if (kind == RetrieverKind::kDense) throw NotImplemented("dense retrieval");
  return Bm25Index::build(history);
}

std::vector<std::vector<RetrievedSnippet>> retrieve_multi(
    const std::map<std::string, UserHistory>& histories, const std::vector<AuthorRole>& authors,
    std::string_view query, int k) {
  std::vector<std::vector<RetrievedSnippet>> out;
  out.reserve(authors.size());
  for (const auto& author : authors) {
    auto it = histories.find(author.user_id);
    if (it == histories.end()) {
      throw ContractViolation("retrieve_multi: no history for author " + author.user_id);
    }
    out.push_back(Bm25Index::build(it->second).retrieve(query, k));
  }
  return out;
}

}  // namespace gistkit::retrieval
