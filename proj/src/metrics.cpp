#include "gistkit/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>

#include "gistkit/errors.hpp"
#include "gistkit/text.hpp"

namespace gistkit::metrics {

namespace {

double f1_from(double overlap, std::size_t candidate_len, std::size_t reference_len) {
  if (candidate_len == 0 && reference_len == 0) return 1.0;
  if (candidate_len == 0 || reference_len == 0 || overlap == 0.0) return 0.0;
  const double precision = overlap / static_cast<double>(candidate_len);
  const double recall = overlap / static_cast<double>(reference_len);
  return 2.0 * precision * recall / (precision + recall);
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractViolation(std::string(what) + ": predictions and references differ in length (" +
                            std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
  if (a == 0) throw ContractViolation(std::string(what) + ": needs at least one pair");
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

double rouge1(std::string_view candidate, std::string_view reference, RougeOptions options) {
  const auto c = tokenize(candidate, options.stem);
  const auto r = tokenize(reference, options.stem);
  std::map<std::string, long> counts;
  for (const auto& token : r) ++counts[token];
  long overlap = 0;
  for (const auto& token : c) {
    auto it = counts.find(token);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return f1_from(static_cast<double>(overlap), c.size(), r.size());
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rougeL(std::string_view candidate, std::string_view reference, RougeOptions options) {
  const auto c = tokenize(candidate, options.stem);
  const auto r = tokenize(reference, options.stem);
  return f1_from(static_cast<double>(lcs_length(c, r)), c.size(), r.size());
}

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
  check_lengths(preds.size(), refs.size(), "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == refs[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double f1_macro(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
  check_lengths(preds.size(), refs.size(), "f1_macro");
  std::set<std::string> classes(refs.begin(), refs.end());
  classes.insert(preds.begin(), preds.end());
  double total = 0.0;
  for (const auto& cls : classes) {
    double tp = 0;
    double fp = 0;
    double fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool p = preds[i] == cls;
      const bool r = refs[i] == cls;
      tp += p && r ? 1 : 0;
      fp += p && !r ? 1 : 0;
      fn += !p && r ? 1 : 0;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    total += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return total / static_cast<double>(classes.size());
}

double mae(const std::vector<double>& preds, const std::vector<double>& refs) {
  check_lengths(preds.size(), refs.size(), "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - refs[i]);
  return sum / static_cast<double>(preds.size());
}

double rmse(const std::vector<double>& preds, const std::vector<double>& refs) {
  check_lengths(preds.size(), refs.size(), "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - refs[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

std::optional<int> parse_rating(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '1' || c > '5') continue;
    const bool digit_before = i > 0 && (is_digit(text[i - 1]) || text[i - 1] == '.');
    const bool digit_after =
        i + 1 < text.size() && (is_digit(text[i + 1]) ||
                                (text[i + 1] == '.' && i + 2 < text.size() && is_digit(text[i + 2])));
    if (!digit_before && !digit_after) return c - '0';
  }
  return std::nullopt;
}

RatingParse rating_or_fallback(std::string_view text, std::optional<int> most_common) {
  if (auto rating = parse_rating(text)) return {*rating, false};
  return {most_common.value_or(3), true};
}

std::string parse_citation_choice(std::string_view text, const std::vector<std::string>& candidates) {
  const std::string reply = trim(text);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (reply == candidates[i]) return candidates[i];
  }
  static const std::regex bracketed(R"(\[\s*([0-9]+)\s*\])");
  static const std::regex bare(R"((^|[^0-9])([0-9]+)([^0-9]|$))");
  std::smatch match;
  std::optional<std::size_t> choice;
  if (std::regex_search(reply, match, bracketed)) {
    choice = std::stoul(match[1].str());
  } else if (std::regex_search(reply, match, bare)) {
    choice = std::stoul(match[2].str());
  }
  if (choice && *choice >= 1 && *choice <= candidates.size()) return candidates[*choice - 1];
  for (const auto& candidate : candidates) {
    if (!candidate.empty() && reply.find(candidate) != std::string::npos) return candidate;
  }
  return reply;
}

std::string parse_category(std::string_view text, const std::vector<std::string>& candidates) {
  const std::string reply = to_lower(trim(text));
  const std::string* best = nullptr;
  for (const auto& candidate : candidates) {
    const std::string lowered = to_lower(candidate);
    if (lowered.empty() || reply.find(lowered) == std::string::npos) continue;
    if (best == nullptr || candidate.size() > best->size()) best = &candidate;
  }
  return best != nullptr ? *best : trim(text);
}

// --- G-Eval ----------------------------------------------------------------------

namespace {

struct Criterion {
  const char* name;
  double GevalScores::*field;
  double max;
};

constexpr Criterion kCriteria[] = {
    {"consistency", &GevalScores::consistency, 5.0},
    {"fluency", &GevalScores::fluency, 3.0},
    {"relevance", &GevalScores::relevance, 5.0},
    {"novelty", &GevalScores::novelty, 3.0},
};

// End of the balanced object starting at `open`, honoring JSON strings.
std::optional<std::size_t> object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::nullopt;
}

std::optional<double> numeric(const Json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = trim(value.get<std::string>());
      double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

// Lowercased-key lookup of the four scores in one JSON object.
std::map<std::string, double> scores_in(const Json& object) {
  std::map<std::string, double> out;
  if (!object.is_object()) return out;
  for (const auto& [key, value] : object.items()) {
    if (auto v = numeric(value)) out[to_lower(trim(key))] = *v;
  }
  return out;
}

bool has_all(const std::map<std::string, double>& scores) {
  return std::all_of(std::begin(kCriteria), std::end(kCriteria),
                     [&](const Criterion& c) { return scores.contains(c.name); });
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

bool GevalScores::clamped() const {
  return std::any_of(warnings.begin(), warnings.end(),
                     [](const std::string& w) { return w.find("clamped") != std::string::npos; });
}

GevalScores parse_geval(std::string_view judge_text) {
  GevalScores result;
  result.raw_judge_text = std::string(judge_text);

  std::optional<std::map<std::string, double>> found;
  std::map<std::string, double> first_object;
  bool saw_object = false;
  for (std::size_t pos = judge_text.find('{'); pos != std::string_view::npos;
       pos = judge_text.find('{', pos + 1)) {
    auto end = object_end(judge_text, pos);
    if (!end) continue;
    Json object = Json::parse(judge_text.substr(pos, *end - pos + 1), nullptr, false);
    if (object.is_discarded() || !object.is_object()) continue;
    auto scores = scores_in(object);
    if (!saw_object) {
      first_object = scores;
      saw_object = true;
    }
    if (has_all(scores)) {
      found = std::move(scores);
      break;
    }
  }

  if (!found) {
    static const std::regex line(
        R"((consistency|fluency|relevance|novelty)\W{0,4}\s*[:=]\s*\**\s*([0-9]+(?:\.[0-9]+)?))",
        std::regex::icase);
    std::map<std::string, double> scores;
    const std::string text(judge_text);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), line);
         it != std::sregex_iterator(); ++it) {
      const std::string name = to_lower((*it)[1].str());
      if (!scores.contains(name)) scores[name] = std::stod((*it)[2].str());
    }
    if (has_all(scores)) {
      found = std::move(scores);
      result.warnings.push_back("judge scores read from text lines, no JSON object");
    } else {
      const auto& partial = saw_object ? first_object : scores;
      std::vector<std::string> missing;
      for (const auto& c : kCriteria) {
        if (!partial.contains(c.name)) missing.emplace_back(c.name);
      }
      throw JudgeParseError(
          (saw_object ? "judge JSON lacks " : "no judge JSON object; missing ") + join(missing, ", "),
          std::string(judge_text));
    }
  }

  for (const auto& c : kCriteria) {
    double v = found->at(c.name);
    const double clamped = std::clamp(v, 1.0, c.max);
    if (clamped != v) {
      result.warnings.push_back(std::string(c.name) + " " + format_score(v) + " clamped to " +
                                format_score(clamped));
    }
    result.*(c.field) = clamped;
  }
  return result;
}

GevalScores average_geval(const std::vector<GevalScores>& samples) {
  if (samples.empty()) throw ContractViolation("average_geval needs at least one sample");
  GevalScores out;
  for (const auto& sample : samples) {
    for (const auto& c : kCriteria) out.*(c.field) += sample.*(c.field);
    out.warnings.insert(out.warnings.end(), sample.warnings.begin(), sample.warnings.end());
  }
  for (const auto& c : kCriteria) out.*(c.field) /= static_cast<double>(samples.size());
  out.raw_judge_text = samples.front().raw_judge_text;
  return out;
}

// --- MetricTable -----------------------------------------------------------------

void MetricTable::add(const std::string& instance_id, const std::string& metric, double value) {
  auto [it, inserted] = rows_.try_emplace(instance_id);
  if (inserted) order_.push_back(instance_id);
  it->second[metric] = value;
}

void MetricTable::set_corpus_metric(const std::string& metric, double value) {
  corpus_[metric] = value;
}

std::optional<double> MetricTable::value(const std::string& instance_id,
                                         const std::string& metric) const {
  auto row = rows_.find(instance_id);
  if (row == rows_.end()) return std::nullopt;
  auto cell = row->second.find(metric);
  if (cell == row->second.end()) return std::nullopt;
  return cell->second;
}

std::vector<std::string> MetricTable::metric_names() const {
  std::set<std::string> names;
  for (const auto& [_, row] : rows_) {
    for (const auto& [name, __] : row) names.insert(name);
  }
  return {names.begin(), names.end()};
}

std::map<std::string, double> MetricTable::aggregate() const {
  std::map<std::string, double> sums;
  std::map<std::string, std::size_t> n;
  for (const auto& id : order_) {
    for (const auto& [name, value] : rows_.at(id)) {
      sums[name] += value;
      ++n[name];
    }
  }
  for (auto& [name, sum] : sums) sum /= static_cast<double>(n[name]);
  return sums;
}

std::map<std::string, std::size_t> MetricTable::counts() const {
  std::map<std::string, std::size_t> n;
  for (const auto& [_, row] : rows_) {
    for (const auto& [name, __] : row) ++n[name];
  }
  return n;
}

std::map<std::string, double> MetricTable::summary() const {
  auto out = aggregate();
  for (const auto& [name, value] : corpus_) out[name] = value;
  return out;
}

Json MetricTable::to_json() const {
  Json rows = Json::array();
  for (const auto& id : order_) rows.push_back({{"instance_id", id}, {"metrics", rows_.at(id)}});
  return {{"instances", std::move(rows)},
          {"aggregate", aggregate()},
          {"corpus", corpus_},
          {"counts", counts()}};
}

std::string MetricTable::to_csv() const {
  std::vector<std::string> names = metric_names();
  for (const auto& [name, _] : corpus_) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  auto cell = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return std::string(buf);
  };
  std::string out = "instance_id";
  for (const auto& name : names) out += "," + name;
  out += "\n";
  for (const auto& id : order_) {
    std::string line = id.find_first_of(",\"\n") == std::string::npos ? id : Json(id).dump();
    for (const auto& name : names) line += "," + cell(value(id, name));
    out += line + "\n";
  }
  const auto summary_row = summary();
  out += "aggregate";
  for (const auto& name : names) {
    auto it = summary_row.find(name);
    out += "," + cell(it == summary_row.end() ? std::nullopt : std::optional<double>(it->second));
  }
  return out + "\n";
}

}  // namespace gistkit::metrics
