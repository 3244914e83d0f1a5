#include "gistkit/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <thread>

#include "fs_util.hpp"
#include "gistkit/errors.hpp"
#include "gistkit/hash.hpp"
#include "gistkit/random.hpp"
#include "gistkit/text.hpp"

namespace gistkit::datasets {

namespace fs = std::filesystem;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "test";
}

std::optional<Split> parse_split(std::string_view text) {
  const std::string lowered = to_lower(text);
  if (lowered == "train") return Split::kTrain;
  if (lowered == "valid" || lowered == "validation" || lowered == "dev") return Split::kValid;
  if (lowered == "test") return Split::kTest;
  return std::nullopt;
}

namespace {

Json instances_json(const std::vector<TaskInstance>& instances) {
  Json out = Json::array();
  for (const auto& instance : instances) out.push_back(to_json(instance));
  return out;
}

std::string field_for_violation(const std::string& violation) {
  if (violation.find("history") != std::string::npos) return "histories";
  if (violation.find("author") != std::string::npos || violation.find("PSW") != std::string::npos) {
    return "authors";
  }
  if (violation.find("input") != std::string::npos) return "input";
  if (violation.find("candidates") != std::string::npos) return "candidates";
  if (violation.find("target") != std::string::npos) return "target";
  if (violation.find("id") != std::string::npos) return "id";
  return {};
}

struct Header {
  CorpusManifest manifest;
  bool has_hash = false;
};

Header read_header(const Json& json, std::optional<TaskKind> expected_task) {
  if (!json.is_object()) throw LoadError(-1, "", "corpus file must be a JSON object");
  Header header;
  const int version = json.value("schema_version", 0);
  if (version != kSchemaVersion) {
    throw LoadError(-1, "schema_version",
                    "unsupported schema version " + std::to_string(version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
  }
  header.manifest.schema_version = version;
  header.manifest.name = json.value("name", "");
  if (!json.contains("task") || !json["task"].is_string()) {
    throw LoadError(-1, "task", "missing task");
  }
  auto task = parse_task_kind(json["task"].get<std::string>());
  if (!task) throw LoadError(-1, "task", "unknown task '" + json["task"].get<std::string>() + "'");
  if (expected_task && *task != *expected_task) {
    throw LoadError(-1, "task",
                    "corpus holds " + std::string(to_string(*task)) + ", expected " +
                        std::string(to_string(*expected_task)));
  }
  header.manifest.task = *task;
  const std::string split = json.value("split", "test");
  auto parsed_split = parse_split(split);
  if (!parsed_split) throw LoadError(-1, "split", "unknown split '" + split + "'");
  header.manifest.split = *parsed_split;
  if (json.contains("content_hash") && !json["content_hash"].is_null()) {
    header.manifest.content_hash = json["content_hash"].get<std::string>();
    header.has_hash = true;
  }
  if (!json.contains("instances") || !json["instances"].is_array()) {
    throw LoadError(-1, "instances", "expected an array");
  }
  return header;
}

}  // namespace

std::string content_hash(const std::vector<TaskInstance>& instances) {
  return sha256_hex(instances_json(instances).dump());
}

Json corpus_to_json(const Corpus& corpus) {
  Json out = {{"schema_version", corpus.manifest.schema_version},
              {"name", corpus.manifest.name},
              {"task", to_string(corpus.manifest.task)},
              {"split", to_string(corpus.manifest.split)},
              {"instance_count", corpus.instances.size()}};
  if (!corpus.manifest.content_hash.empty()) out["content_hash"] = corpus.manifest.content_hash;
  out["instances"] = instances_json(corpus.instances);
  return out;
}

Corpus corpus_from_json(const Json& json, std::optional<TaskKind> expected_task) {
  Header header = read_header(json, expected_task);
  Corpus corpus;
  corpus.manifest = header.manifest;
  const Json& instances = json["instances"];
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const long index = static_cast<long>(i);
    TaskInstance instance = task_instance_from_json(instances[i], index);
    if (instance.task != corpus.manifest.task) {
      throw LoadError(index, "task",
                      "instance task " + std::string(to_string(instance.task)) +
                          " differs from corpus task " +
                          std::string(to_string(corpus.manifest.task)));
    }
    auto violations = validate_instance(instance);
    if (!violations.empty()) {
      throw LoadError(index, field_for_violation(violations.front()), join(violations, "; "));
    }
    corpus.instances.push_back(std::move(instance));
  }
  corpus.manifest.instance_count = corpus.instances.size();
  if (json.contains("instance_count") &&
      json["instance_count"].get<std::size_t>() != corpus.instances.size()) {
    throw IntegrityError("instance_count " + json["instance_count"].dump() + " but file holds " +
                         std::to_string(corpus.instances.size()) + " instances");
  }
  if (header.has_hash) {
    const std::string actual = content_hash(corpus.instances);
    if (actual != corpus.manifest.content_hash) {
      throw IntegrityError("content hash mismatch: manifest " + corpus.manifest.content_hash +
                           ", computed " + actual);
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, std::optional<TaskKind> expected_task) {
  Json json;
  try {
    json = Json::parse(detail::read_file(path));
  } catch (const Json::parse_error& e) {
    throw LoadError(-1, "", path + " is not valid JSON: " + e.what());
  }
  return corpus_from_json(json, expected_task);
}

void save_corpus(const std::string& path, Corpus corpus) {
  corpus.manifest.instance_count = corpus.instances.size();
  corpus.manifest.content_hash = content_hash(corpus.instances);
  detail::write_file_atomic(path, corpus_to_json(corpus).dump(2) + "\n");
}

std::vector<std::string> validate_corpus_file(const std::string& path) {
  std::vector<std::string> problems;
  Json json;
  try {
    json = Json::parse(detail::read_file(path));
  } catch (const std::exception& e) {
    return {e.what()};
  }
  Header header;
  try {
    header = read_header(json, std::nullopt);
  } catch (const Error& e) {
    return {e.what()};
  }
  std::vector<TaskInstance> decoded;
  bool complete = true;
  const Json& instances = json["instances"];
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const long index = static_cast<long>(i);
    try {
      TaskInstance instance = task_instance_from_json(instances[i], index);
      if (instance.task != header.manifest.task) {
        problems.push_back(LoadError(index, "task", "instance task differs from corpus task").what());
      }
      for (const auto& violation : validate_instance(instance)) {
        problems.push_back(LoadError(index, field_for_violation(violation), violation).what());
      }
      decoded.push_back(std::move(instance));
    } catch (const Error& e) {
      problems.emplace_back(e.what());
      complete = false;
    }
  }
  if (complete && header.has_hash && content_hash(decoded) != header.manifest.content_hash) {
    problems.emplace_back("content hash mismatch");
  }
  return problems;
}

// --- statistics -------------------------------------------------------------

const std::array<std::string, 9>& stats_row_labels() {
  static const std::array<std::string, 9> labels = {
      "# of Papers",
      "# of Authors",
      "Avg. Authors / Paper",
      "Avg. History Papers / Author",
      "Avg. Research Interests / Author",
      "Avg. Title Length",
      "Avg. Abstract Length",
      "Avg. Research Question Length",
      "Avg. References / Paper",
  };
  return labels;
}

namespace {

std::string implied_title(const TaskInstance& instance) {
  if (auto title = instance.context_value("title"); !title.empty()) return title;
  switch (instance.task) {
    case TaskKind::kPsw1:
    case TaskKind::kPsw4: return target_text(instance.target);
    case TaskKind::kPsw2:
    case TaskKind::kPsw3: return instance.input;
    default: return {};
  }
}

std::string implied_abstract(const TaskInstance& instance) {
  if (auto abstract = instance.context_value("abstract"); !abstract.empty()) return abstract;
  switch (instance.task) {
    case TaskKind::kPsw3: return target_text(instance.target);
    case TaskKind::kPsw4: return instance.input;
    default: return {};
  }
}

std::size_t reference_count(const TaskInstance& instance) {
  auto it = instance.context.find("reference_count");
  if (it != instance.context.end() && !it->second.empty()) {
    try {
      return static_cast<std::size_t>(std::stoul(it->second.front()));
    } catch (const std::exception&) {
      throw LoadError(-1, "context.reference_count",
                      "instance " + instance.instance_id + ": not an integer");
    }
  }
  auto refs = instance.context.find("references");
  return refs == instance.context.end() ? 0 : refs->second.size();
}

double mean(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

}  // namespace

CorpusStats compute_stats(const Corpus& corpus) {
  if (corpus.instances.empty()) throw EmptyCorpus();
  CorpusStats stats;
  stats.papers = corpus.instances.size();

  std::map<std::string, std::size_t> history_sizes;  // first occurrence wins
  std::map<std::string, std::size_t> interest_counts;
  std::size_t author_slots = 0;
  double title_sum = 0, abstract_sum = 0, refs_sum = 0, question_sum = 0;
  std::size_t titles = 0, abstracts = 0, question_papers = 0;

  for (const auto& instance : corpus.instances) {
    author_slots += instance.authors.size();
    for (const auto& author : instance.authors) {
      auto history = instance.histories.find(author.user_id);
      const std::size_t size = history == instance.histories.end() ? 0 : history->second.entries.size();
      history_sizes.try_emplace(author.user_id, size);
    }
    if (auto interests = instance.context.find("research_interests");
        interests != instance.context.end() && instance.authors.size() == 1) {
      interest_counts.try_emplace(instance.authors.front().user_id, interests->second.size());
    }
    if (auto title = implied_title(instance); !title.empty()) {
      title_sum += static_cast<double>(utf8_length(title));
      ++titles;
    }
    if (auto abstract = implied_abstract(instance); !abstract.empty()) {
      abstract_sum += static_cast<double>(utf8_length(abstract));
      ++abstracts;
    }
    if (auto questions = instance.context.find("research_questions");
        questions != instance.context.end() && !questions->second.empty()) {
      for (const auto& q : questions->second) question_sum += static_cast<double>(utf8_length(q));
      ++question_papers;
    }
    refs_sum += static_cast<double>(reference_count(instance));
  }

  stats.authors = history_sizes.size();
  stats.avg_authors_per_paper = mean(static_cast<double>(author_slots), stats.papers);
  double history_sum = 0;
  for (const auto& [_, size] : history_sizes) history_sum += static_cast<double>(size);
  stats.avg_history_papers_per_author = mean(history_sum, stats.authors);
  stats.avg_title_length = mean(title_sum, titles);
  stats.avg_abstract_length = mean(abstract_sum, abstracts);
  stats.avg_refs_per_paper = mean(refs_sum, stats.papers);
  if (!interest_counts.empty()) {
    double sum = 0;
    for (const auto& [_, n] : interest_counts) sum += static_cast<double>(n);
    stats.avg_research_interests_per_author = mean(sum, interest_counts.size());
  }
  if (question_papers > 0) stats.avg_research_question_length = mean(question_sum, question_papers);
  return stats;
}

namespace {

std::string format_stat(double value) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

}  // namespace

std::string stats_csv(const CorpusStats& stats, const std::string& column) {
  const auto& labels = stats_row_labels();
  auto optional_cell = [](const std::optional<double>& v) { return v ? format_stat(*v) : ""; };
  const std::array<std::string, 9> values = {
      std::to_string(stats.papers),
      std::to_string(stats.authors),
      format_stat(stats.avg_authors_per_paper),
      format_stat(stats.avg_history_papers_per_author),
      optional_cell(stats.avg_research_interests_per_author),
      format_stat(stats.avg_title_length),
      format_stat(stats.avg_abstract_length),
      optional_cell(stats.avg_research_question_length),
      format_stat(stats.avg_refs_per_paper),
  };
  std::string out = "Statistic," + column + "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool quote = labels[i].find(',') != std::string::npos;
    out += (quote ? "\"" + labels[i] + "\"" : labels[i]) + "," + values[i] + "\n";
  }
  return out;
}

Json stats_to_json(const CorpusStats& stats) {
  Json out = {{"papers", stats.papers},
              {"authors", stats.authors},
              {"avg_authors_per_paper", stats.avg_authors_per_paper},
              {"avg_history_papers_per_author", stats.avg_history_papers_per_author},
              {"avg_title_length", stats.avg_title_length},
              {"avg_abstract_length", stats.avg_abstract_length},
              {"avg_refs_per_paper", stats.avg_refs_per_paper}};
  out["avg_research_interests_per_author"] = stats.avg_research_interests_per_author
                                                 ? Json(*stats.avg_research_interests_per_author)
                                                 : Json(nullptr);
  out["avg_research_question_length"] = stats.avg_research_question_length
                                            ? Json(*stats.avg_research_question_length)
                                            : Json(nullptr);
  return out;
}

CorpusStats stats_from_json(const Json& json) {
  CorpusStats stats;
  stats.papers = json.at("papers").get<std::size_t>();
  stats.authors = json.at("authors").get<std::size_t>();
  stats.avg_authors_per_paper = json.at("avg_authors_per_paper").get<double>();
  stats.avg_history_papers_per_author = json.at("avg_history_papers_per_author").get<double>();
  stats.avg_title_length = json.at("avg_title_length").get<double>();
  stats.avg_abstract_length = json.at("avg_abstract_length").get<double>();
  stats.avg_refs_per_paper = json.at("avg_refs_per_paper").get<double>();
  auto optional = [&](const char* key) -> std::optional<double> {
    if (!json.contains(key) || json[key].is_null()) return std::nullopt;
    return json[key].get<double>();
  };
  stats.avg_research_interests_per_author = optional("avg_research_interests_per_author");
  stats.avg_research_question_length = optional("avg_research_question_length");
  return stats;
}

// --- splits -----------------------------------------------------------------

SplitIndices split_indices(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ContractViolation("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractViolation("split ratios must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);

  const auto cut1 = std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[0] + 1e-9)));
  const auto cut2 = std::min(
      n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * (ratios[0] + ratios[1]) + 1e-9)));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<long>(cut1));
  out.valid.assign(order.begin() + static_cast<long>(cut1), order.begin() + static_cast<long>(cut2));
  out.test.assign(order.begin() + static_cast<long>(cut2), order.end());
  if (ratios[2] == 0.0 && !out.test.empty()) {
    // Rounding slack goes to the last non-empty ratio.
    auto& sink = ratios[1] > 0.0 ? out.valid : out.train;
    sink.insert(sink.end(), out.test.begin(), out.test.end());
    out.test.clear();
  }
  return out;
}

// --- PSW build ---------------------------------------------------------------

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  const auto slot = std::max(now, next_);
  next_ = slot + interval_;
  lock.unlock();
  std::this_thread::sleep_until(slot);
}

namespace {

AuthorRoleKind role_at(std::size_t i, std::size_t l) {
  if (i == 0) return AuthorRoleKind::kFirstAuthor;
  if (i + 1 == l) return AuthorRoleKind::kLastAuthor;
  return AuthorRoleKind::kMiddleAuthor;
}

std::string padded(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, n);
  return buf;
}

}  // namespace

PswBuildResult build_psw(ScholarlyIndex& index, const PswBuildOptions& options) {
  if (options.out_dir.empty()) throw ContractViolation("build_psw needs an output directory");
  if (options.history_limit < 1) throw ContractViolation("history_limit must be >= 1");
  PswBuildResult result;

  std::vector<PaperRecord> candidates = index.search(options.query, options.min_year, options.max_papers);

  std::vector<PaperRecord> kept;
  for (auto& paper : candidates) {
    if (paper.authors.size() < 2) {
      result.skipped.push_back(paper.paper_id + ": fewer than two authors");
    } else if (paper.year < options.min_year) {
      result.skipped.push_back(paper.paper_id + ": published before " + std::to_string(options.min_year));
    } else if (trim(paper.abstract).empty()) {
      result.skipped.push_back(paper.paper_id + ": missing abstract");
    } else if (trim(paper.title).empty()) {
      result.skipped.push_back(paper.paper_id + ": missing title");
    } else {
      kept.push_back(std::move(paper));
    }
  }

  // Author histories, fetched once per distinct source author.
  std::map<std::string, std::vector<PaperRecord>> author_histories;
  std::set<std::string> failed_authors;
  for (const auto& paper : kept) {
    for (const auto& author : paper.authors) {
      if (author_histories.contains(author.author_id) || failed_authors.contains(author.author_id)) {
        continue;
      }
      try {
        author_histories[author.author_id] =
            index.author_papers(author.author_id, options.history_limit + 1);
      } catch (const Error& e) {
        failed_authors.insert(author.author_id);
        result.failures.push_back("author " + author.author_id + ": " + e.what());
      }
    }
  }

  std::vector<PaperRecord> usable;
  std::vector<std::vector<std::string>> references;
  for (auto& paper : kept) {
    const bool missing = std::any_of(paper.authors.begin(), paper.authors.end(), [&](const AuthorRef& a) {
      return failed_authors.contains(a.author_id);
    });
    if (missing) {
      result.skipped.push_back(paper.paper_id + ": an author history could not be fetched");
      continue;
    }
    std::vector<std::string> titles = paper.reference_titles;
    if (titles.empty() && paper.reference_count > 0) {
      try {
        titles = index.reference_titles(paper.paper_id);
      } catch (const Error& e) {
        result.failures.push_back("references of " + paper.paper_id + ": " + e.what());
      }
    }
    references.push_back(std::move(titles));
    usable.push_back(std::move(paper));
  }

  // Stable first-seen anonymization over the usable papers.
  std::map<std::string, std::string> anonymized;
  std::vector<std::pair<std::string, std::string>> map_order;
  for (const auto& paper : usable) {
    for (const auto& author : paper.authors) {
      if (!anonymized.contains(author.author_id)) {
        const std::string id = padded("author-", anonymized.size() + 1);
        anonymized.emplace(author.author_id, id);
        map_order.emplace_back(author.author_id, id);
      }
    }
  }

  std::vector<std::array<TaskInstance, 3>> per_paper;  // psw1, psw3, psw4
  std::vector<bool> has_refs;
  for (std::size_t p = 0; p < usable.size(); ++p) {
    const PaperRecord& paper = usable[p];
    TaskInstance base;
    base.instance_id = padded("paper-", p + 1);
    for (std::size_t i = 0; i < paper.authors.size(); ++i) {
      const std::string& anon = anonymized.at(paper.authors[i].author_id);
      if (base.histories.contains(anon)) continue;  // same person listed twice
      base.authors.push_back({anon, role_at(i, paper.authors.size()), static_cast<int>(base.authors.size())});
      UserHistory history{anon, {}};
      for (const auto& past : author_histories.at(paper.authors[i].author_id)) {
        if (past.paper_id == paper.paper_id || trim(past.title).empty() || trim(past.abstract).empty()) {
          continue;
        }
        if (history.entries.size() >= static_cast<std::size_t>(options.history_limit)) break;
        HistoryEntry entry{past.title, past.abstract, {}};
        if (past.year > 0) entry.meta["year"] = std::to_string(past.year);
        history.entries.push_back(std::move(entry));
      }
      base.histories.emplace(anon, std::move(history));
    }
    base.context["title"] = {paper.title};
    base.context["abstract"] = {paper.abstract};
    base.context["reference_count"] = {std::to_string(paper.reference_count)};
    if (!references[p].empty()) base.context["references"] = references[p];

    TaskInstance psw1 = base, psw3 = base, psw4 = base;
    psw1.task = TaskKind::kPsw1;
    psw1.input = join(references[p], "\n");
    psw1.target = paper.title;
    psw3.task = TaskKind::kPsw3;
    psw3.input = paper.title;
    psw3.target = paper.abstract;
    psw4.task = TaskKind::kPsw4;
    psw4.input = paper.abstract;
    psw4.target = paper.title;
    per_paper.push_back({std::move(psw1), std::move(psw3), std::move(psw4)});
    has_refs.push_back(!references[p].empty());
    if (references[p].empty()) {
      result.skipped.push_back(paper.paper_id + ": no reference titles, left out of psw1");
    }
  }
  result.papers = usable.size();

  const SplitIndices parts = split_indices(usable.size(), options.ratios, options.seed);
  const std::array<std::pair<Split, const std::vector<std::size_t>*>, 3> splits = {{
      {Split::kTrain, &parts.train}, {Split::kValid, &parts.valid}, {Split::kTest, &parts.test}}};
  const std::array<TaskKind, 3> tasks = {TaskKind::kPsw1, TaskKind::kPsw3, TaskKind::kPsw4};

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const auto& [split, members] : splits) {
      std::vector<std::size_t> sorted = *members;
      std::sort(sorted.begin(), sorted.end());
      Corpus corpus;
      corpus.manifest.name = options.name + "-" + std::string(to_string(tasks[t])) + "-" +
                             std::string(to_string(split));
      corpus.manifest.task = tasks[t];
      corpus.manifest.split = split;
      for (std::size_t p : sorted) {
        if (tasks[t] == TaskKind::kPsw1 && !has_refs[p]) continue;
        corpus.instances.push_back(per_paper[p][t]);
      }
      const std::string path = (fs::path(options.out_dir) /
                                (std::string(to_string(tasks[t])) + "_" + std::string(to_string(split)) + ".json"))
                                   .string();
      save_corpus(path, std::move(corpus));
      result.files.push_back(path);
    }
  }

  Json private_map = Json::object();
  for (const auto& [source, anon] : map_order) private_map[source] = anon;
  result.private_map_path = (fs::path(options.out_dir) / "author_map.private.json").string();
  detail::write_file_atomic(result.private_map_path, private_map.dump(2) + "\n");
  return result;
}

}  // namespace gistkit::datasets
