#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: no shared code with the library beyond the
// tokenizer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Scored {
  std::size_t doc;
  double score;
};

/// Scores every document against the distinct query terms, then sorts by
/// score descending and index ascending. Zero scores are dropped.
inline std::vector<Scored> bm25_all_docs(const std::vector<std::vector<std::string>>& docs,
                                         const std::vector<std::string>& query, int k,
                                         double k1 = 1.2, double b = 0.75) {
  const double n = static_cast<double>(docs.size());
  double total = 0;
  for (const auto& d : docs) total += static_cast<double>(d.size());
  const double avg = docs.empty() ? 0.0 : total / n;
  const std::set<std::string> terms(query.begin(), query.end());

  std::vector<Scored> scored;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0;
    for (const auto& term : terms) {
      double df = 0;
      for (const auto& d : docs)
        if (std::find(d.begin(), d.end(), term) != d.end()) df += 1;
      const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
      if (tf == 0) continue;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      const double norm = avg > 0 ? 1.0 - b + b * static_cast<double>(docs[i].size()) / avg : 1.0;
      score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
    if (score > 0) scored.push_back({i, score});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.doc < y.doc;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));
  return scored;
}

inline bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& of) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < of.size() && j < sub.size(); ++i)
    if (of[i] == sub[j]) ++j;
  return j == sub.size();
}

/// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_brute_force(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  std::size_t best = 0;
  const std::uint32_t limit = 1u << a.size();
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
  }
  return best;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len,
                                              int vocabulary) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> word(0, vocabulary - 1);
  std::vector<std::string> out(len(rng));
  for (auto& t : out) t = "w" + std::to_string(word(rng));
  return out;
}

inline std::string joined(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace oracle
