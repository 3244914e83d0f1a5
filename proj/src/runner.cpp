#include "gistkit/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <set>

#include "fs_util.hpp"
#include "gistkit/errors.hpp"
#include "gistkit/hash.hpp"
#include "gistkit/prompt.hpp"
#include "gistkit/random.hpp"
#include "gistkit/retrieval.hpp"
#include "gistkit/text.hpp"

namespace gistkit::runner {

namespace fs = std::filesystem;

namespace {

std::string fmt(double value, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, value);
  return buf;
}

std::string pad(const std::string& text, std::size_t width) {
  return text.size() >= width ? text : text + std::string(width - text.size(), ' ');
}

// --- gisting ---------------------------------------------------------------

struct GistOutcome {
  std::optional<gisting::GistResult> result;
  std::string error;
};

std::string gist_key(const UserHistory& history) {
  return history.user_id + "\n" + gisting::ProfileStore::history_hash(history);
}

/// Profiles each distinct history once: store hits first, then one batch for
/// the misses. Keyed by gist_key.
std::map<std::string, GistOutcome> gist_histories(const std::vector<const UserHistory*>& histories,
                                                  TaskFamily family, const RunConfig& config,
                                                  llm::Gateway& gateway, bool refresh) {
  std::map<std::string, GistOutcome> out;
  std::optional<gisting::ProfileStore> store;
  if (!config.cache_dir.empty()) store.emplace((fs::path(config.cache_dir) / "profiles").string());

  std::vector<const UserHistory*> pending;
  std::vector<llm::CompletionRequest> requests;
  for (const UserHistory* history : histories) {
    const std::string key = gist_key(*history);
    if (out.count(key) != 0) continue;
    GistOutcome& outcome = out[key];
    if (store && !refresh) {
      if (auto hit = store->load(*history, family, config.model_id)) {
        outcome.result = std::move(*hit);
        continue;
      }
    }
    try {
      requests.push_back(gisting::gist_request(*history, family, config));
      pending.push_back(history);
    } catch (const Error& e) {
      outcome.error = e.what();
    }
  }

  auto batch = gateway.complete_batch(requests, config.max_in_flight);
  for (const auto& failure : batch.failures) {
    out[gist_key(*pending[failure.index])].error = failure.message;
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!batch.responses[i]) continue;
    auto result = gisting::parse_profile(pending[i]->user_id, family, batch.responses[i]->text);
    if (store) store->save(*pending[i], family, config.model_id, result);
    out[gist_key(*pending[i])].result = std::move(result);
  }
  return out;
}

/// First history seen for each user, scanning instances in id order.
std::map<std::string, const UserHistory*> user_pool(const std::vector<const TaskInstance*>& instances) {
  std::map<std::string, const UserHistory*> pool;
  for (const TaskInstance* instance : instances) {
    for (const auto& [user, history] : instance->histories) pool.emplace(user, &history);
  }
  return pool;
}

std::vector<const TaskInstance*> sorted_instances(const datasets::Corpus& corpus) {
  std::vector<const TaskInstance*> out;
  for (const auto& instance : corpus.instances) out.push_back(&instance);
  std::stable_sort(out.begin(), out.end(), [](const TaskInstance* a, const TaskInstance* b) {
    return a->instance_id < b->instance_id;
  });
  return out;
}

// --- per-instance state ----------------------------------------------------

struct Plan {
  const TaskInstance* instance = nullptr;
  InstanceArtifact artifact;
  std::vector<AuthorRole> authors;
  std::optional<int> fallback_rating;
  std::optional<llm::CompletionRequest> request;

  void fail(const std::string& stage, const std::string& message) {
    if (!artifact.ok()) return;
    artifact.stage = stage;
    artifact.error = message;
  }
};

std::vector<std::string> ids_of(const std::vector<AuthorRole>& authors) {
  std::vector<std::string> ids;
  for (const auto& author : authors) ids.push_back(author.user_id);
  return ids;
}

const UserHistory& history_of(const TaskInstance& instance, const std::string& user) {
  auto it = instance.histories.find(user);
  if (it == instance.histories.end()) {
    throw ContractViolation("instance " + instance.instance_id + " has no history for " + user);
  }
  return it->second;
}

void score(Plan& plan, TaskKind task, const std::string& response, const RunConfig& config) {
  const TaskInstance& instance = *plan.instance;
  InstanceArtifact& art = plan.artifact;
  art.reference = target_text(instance.target);
  const std::vector<std::string> candidates = instance.candidates.value_or(std::vector<std::string>{});

  if (task == TaskKind::kLamp1) {
    art.prediction = metrics::parse_citation_choice(response, candidates);
    art.metrics["accuracy"] = art.prediction == art.reference ? 1.0 : 0.0;
  } else if (task == TaskKind::kLamp2) {
    art.prediction = metrics::parse_category(response, candidates);
    art.metrics["accuracy"] = art.prediction == art.reference ? 1.0 : 0.0;
  } else if (task == TaskKind::kLamp3) {
    auto rating = metrics::rating_or_fallback(response, plan.fallback_rating);
    art.prediction = std::to_string(rating.value);
    const double reference = std::get<Rating>(instance.target).value;
    const double diff = rating.value - reference;
    art.metrics["abs_error"] = std::fabs(diff);
    art.metrics["squared_error"] = diff * diff;
    art.metrics["rating_fallback"] = rating.fallback ? 1.0 : 0.0;
    if (rating.fallback) art.warnings.push_back("RatingFallback: no rating in reply, used " + art.prediction);
  } else {
    art.prediction = trim(response);
    metrics::RougeOptions options{config.stemming};
    art.metrics["rouge1"] = metrics::rouge1(art.prediction, art.reference, options);
    art.metrics["rougeL"] = metrics::rougeL(art.prediction, art.reference, options);
  }
}

std::vector<std::string> judge_references(const std::string& reference) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(reference)) {
    auto trimmed = trim(line);
    if (!trimmed.empty()) out.push_back(std::move(trimmed));
  }
  if (out.empty()) out.push_back(reference);
  return out;
}

// --- JSON helpers ----------------------------------------------------------

Json artifact_to_json(const InstanceArtifact& a) {
  Json retrieved = Json::array();
  for (const auto& group : a.retrieved) retrieved.push_back(group);
  Json out = {
      {"instance_id", a.instance_id},
      {"author_order", a.author_order},
      {"profile_sources", a.profile_sources},
      {"profile_fingerprint", a.profile_fingerprint},
      {"composed_profile", a.composed_profile},
      {"retrieved", retrieved},
      {"prompt",
       {{"template", a.prompt.template_id},
        {"sections", a.prompt.sections},
        {"binding_hash", a.prompt.binding_hash},
        {"prompt_hash", a.prompt.prompt_hash},
        {"text", a.prompt.text}}},
      {"request_key", a.request_key},
      {"response_hash", a.response_hash},
      {"prediction", a.prediction},
      {"reference", a.reference},
      {"metrics", a.metrics},
      {"judge_request_keys", a.judge_request_keys},
      {"warnings", a.warnings},
  };
  if (!a.ok()) out["error"] = {{"stage", a.stage}, {"message", a.error}};
  return out;
}

InstanceArtifact artifact_from_json(const Json& j) {
  InstanceArtifact a;
  a.instance_id = j.value("instance_id", "");
  a.author_order = j.value("author_order", std::vector<std::string>{});
  a.profile_sources = j.value("profile_sources", std::map<std::string, std::string>{});
  a.profile_fingerprint = j.value("profile_fingerprint", "");
  a.composed_profile = j.value("composed_profile", "");
  a.retrieved = j.value("retrieved", std::vector<std::vector<std::string>>{});
  if (j.contains("prompt")) {
    const Json& p = j["prompt"];
    a.prompt.template_id = p.value("template", "");
    a.prompt.sections = p.value("sections", std::vector<std::string>{});
    a.prompt.binding_hash = p.value("binding_hash", "");
    a.prompt.prompt_hash = p.value("prompt_hash", "");
    a.prompt.text = p.value("text", "");
  }
  a.request_key = j.value("request_key", "");
  a.response_hash = j.value("response_hash", "");
  a.prediction = j.value("prediction", "");
  a.reference = j.value("reference", "");
  a.metrics = j.value("metrics", std::map<std::string, double>{});
  a.judge_request_keys = j.value("judge_request_keys", std::vector<std::string>{});
  a.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("error")) {
    a.stage = j["error"].value("stage", "");
    a.error = j["error"].value("message", "");
  }
  return a;
}

Json retriever_json(TaskKind task, const RunConfig& config) {
  retrieval::Bm25Params params;
  return {{"kind", "bm25"}, {"k", config.k_for(task)}, {"k1", params.k1}, {"b", params.b}};
}

std::string utc_timestamp(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace

// --- reference table --------------------------------------------------------

ReferenceTable reference_from_json(const Json& json) {
  if (!json.is_object() || !json.contains("entries") || !json["entries"].is_array()) {
    throw LoadError(-1, "entries", "reference table needs an entries array");
  }
  ReferenceTable table;
  long index = 0;
  for (const auto& e : json["entries"]) {
    const std::string path = "entries[" + std::to_string(index++) + "]";
    ReferenceEntry entry;
    entry.source = e.value("source", "");
    entry.method = e.value("method", "");
    auto task = parse_task_kind(e.value("task", ""));
    if (!task) throw LoadError(-1, path + ".task", "unknown task '" + e.value("task", "") + "'");
    entry.task = *task;
    auto setting = parse_setting(e.value("setting", "single_author"));
    if (!setting) throw LoadError(-1, path + ".setting", "unknown setting");
    entry.setting = *setting;
    auto ablation = parse_ablation(e.value("ablation", "none"));
    if (!ablation) throw LoadError(-1, path + ".ablation", "unknown ablation");
    entry.ablation = *ablation;
    if (!e.contains("metrics") || !e["metrics"].is_object()) {
      throw LoadError(-1, path + ".metrics", "metrics must be an object");
    }
    for (const auto& [name, value] : e["metrics"].items()) {
      if (!value.is_number()) throw LoadError(-1, path + ".metrics." + name, "not a number");
      entry.metrics[name] = value.get<double>();
    }
    table.entries.push_back(std::move(entry));
  }
  return table;
}

ReferenceTable load_reference(const std::string& path) {
  Json json = Json::parse(detail::read_file(path), nullptr, false);
  if (json.is_discarded()) throw LoadError(-1, "", path + " is not valid JSON");
  return reference_from_json(json);
}

namespace {

void append_rows(std::vector<ComparisonRow>& rows, const ReferenceEntry& entry,
                 const std::map<std::string, double>& summary) {
  for (const auto& [metric, value] : entry.metrics) {
    ComparisonRow row;
    row.source = entry.source;
    row.method = entry.method;
    row.task = std::string(to_string(entry.task));
    row.setting = std::string(to_string(entry.setting));
    row.ablation = std::string(to_string(entry.ablation));
    row.metric = metric;
    row.reference = value;
    if (auto it = summary.find(metric); it != summary.end()) {
      row.ours = it->second;
      row.delta = it->second - value;
    }
    rows.push_back(std::move(row));
  }
}

}  // namespace

std::vector<ComparisonRow> compare(TaskKind task, Setting setting, Ablation ablation,
                                   const std::map<std::string, double>& summary,
                                   const ReferenceTable& reference) {
  std::vector<ComparisonRow> rows;
  const bool lamp = family_of(task) == TaskFamily::kLamp;
  for (const auto& entry : reference.entries) {
    if (entry.task != task) continue;
    // LaMP rows are whole-system baselines listed side by side; PSW rows are
    // specific setting/ablation cells.
    if (!lamp && (entry.setting != setting || entry.ablation != ablation)) continue;
    append_rows(rows, entry, summary);
  }
  return rows;
}

std::vector<ComparisonRow> reference_rows(const ReferenceTable& reference,
                                          std::optional<TaskKind> task) {
  std::vector<ComparisonRow> rows;
  for (const auto& entry : reference.entries) {
    if (task && entry.task != *task) continue;
    append_rows(rows, entry, {});
  }
  return rows;
}

std::string render_comparison(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) return "no reference rows\n";
  const std::vector<std::string> header = {"source", "method", "task", "setting", "ablation",
                                           "metric", "ours", "reference", "delta"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.source, r.method, r.task, r.setting, r.ablation, r.metric,
                     r.ours ? fmt(*r.ours) : "-", fmt(r.reference, "%.3f"),
                     r.delta ? fmt(*r.delta, "%+.4f") : "-"});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += c + 1 < row.size() ? pad(row[c], width[c] + 2) : row[c];
    }
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& row : cells) out += line(row);
  return out;
}

Json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json row = {{"source", r.source},     {"method", r.method}, {"task", r.task},
                {"setting", r.setting},   {"ablation", r.ablation}, {"metric", r.metric},
                {"reference", r.reference}};
    row["ours"] = r.ours ? Json(*r.ours) : Json(nullptr);
    row["delta"] = r.delta ? Json(*r.delta) : Json(nullptr);
    out.push_back(std::move(row));
  }
  return out;
}

// --- report -----------------------------------------------------------------

Json EvalReport::to_json() const {
  Json config_json = gistkit::to_json(config);
  config_json.erase("cache_dir");
  Json instances_json = Json::array();
  for (const auto& a : instances) instances_json.push_back(artifact_to_json(a));
  Json out = {
      {"schema", "gistkit.report/1"},
      {"task", std::string(to_string(task))},
      {"setting", std::string(to_string(config.setting))},
      {"ablation", std::string(to_string(config.ablation))},
      {"config", config_json},
      {"corpus",
       {{"name", corpus.name},
        {"split", std::string(datasets::to_string(corpus.split))},
        {"content_hash", corpus.content_hash},
        {"instance_count", corpus.instance_count}}},
      {"backend", backend},
      {"retriever", retriever_json(task, config)},
      {"summary", metrics.summary()},
      {"metrics", metrics.to_json()},
      {"instances", instances_json},
      {"errors", errors},
      {"failed", failed},
  };
  if (!comparison.empty()) out["reference_comparison"] = comparison_to_json(comparison);
  return out;
}

Json EvalReport::meta_json() const {
  std::size_t cached = 0;
  for (const auto& a : instances) cached += a.cached ? 1 : 0;
  return {{"started_at", started_at},         {"wall_clock_ms", wall_clock_ms},
          {"provider_calls", provider_calls}, {"cached_responses", cached},
          {"cache_dir", config.cache_dir}};
}

std::string EvalReport::render() const {
  std::string out;
  out += "task      " + std::string(to_string(task)) + "\n";
  out += "setting   " + std::string(to_string(config.setting)) + "\n";
  out += "ablation  " + std::string(to_string(config.ablation)) + "\n";
  out += "model     " + config.model_id + " (backend " + backend + ")\n";
  out += "retriever bm25 k=" + std::to_string(config.k_for(task)) + "\n";
  out += "corpus    " + corpus.name + " [" + std::string(datasets::to_string(corpus.split)) + "] " +
         std::to_string(corpus.instance_count) + " instances\n";
  out += "seed      " + std::to_string(config.seed) + "\n";
  out += "errors    " + std::to_string(errors) + (failed ? " (run failed)" : "") + "\n\n";

  const auto summary = metrics.summary();
  const auto counts = metrics.counts();
  std::size_t width = 6;
  for (const auto& [name, _] : summary) width = std::max(width, name.size());
  out += pad("metric", width + 2) + pad("value", 12) + "n\n";
  for (const auto& [name, value] : summary) {
    auto it = counts.find(name);
    const std::string n = it != counts.end() ? std::to_string(it->second) : "corpus";
    out += pad(name, width + 2) + pad(fmt(value), 12) + n + "\n";
  }
  bool header = false;
  for (const auto& a : instances) {
    if (a.ok()) continue;
    if (!header) out += "\nfailed instances\n";
    header = true;
    out += "  " + a.instance_id + " [" + a.stage + "] " + a.error + "\n";
  }
  if (!comparison.empty()) out += "\nreference comparison\n" + render_comparison(comparison);
  return out;
}

EvalReport report_from_json(const Json& json) {
  if (!json.is_object() || json.value("schema", "") != "gistkit.report/1") {
    throw LoadError(-1, "schema", "not a gistkit report");
  }
  EvalReport report;
  auto task = parse_task_kind(json.value("task", ""));
  if (!task) throw LoadError(-1, "task", "unknown task");
  report.task = *task;
  report.config = run_config_from_json(json.at("config"));
  const Json& corpus = json.at("corpus");
  report.corpus.name = corpus.value("name", "");
  report.corpus.task = *task;
  report.corpus.split = datasets::parse_split(corpus.value("split", "test")).value_or(datasets::Split::kTest);
  report.corpus.content_hash = corpus.value("content_hash", "");
  report.corpus.instance_count = corpus.value("instance_count", std::size_t{0});
  report.backend = json.value("backend", "");
  for (const auto& a : json.value("instances", Json::array())) {
    report.instances.push_back(artifact_from_json(a));
    const auto& art = report.instances.back();
    if (!art.ok()) continue;
    for (const auto& [name, value] : art.metrics) report.metrics.add(art.instance_id, name, value);
  }
  if (json.contains("metrics") && json["metrics"].contains("corpus")) {
    for (const auto& [name, value] : json["metrics"]["corpus"].items()) {
      report.metrics.set_corpus_metric(name, value.get<double>());
    }
  }
  report.errors = json.value("errors", std::size_t{0});
  report.failed = json.value("failed", false);
  for (const auto& r : json.value("reference_comparison", Json::array())) {
    ComparisonRow row;
    row.source = r.value("source", "");
    row.method = r.value("method", "");
    row.task = r.value("task", "");
    row.setting = r.value("setting", "");
    row.ablation = r.value("ablation", "");
    row.metric = r.value("metric", "");
    row.reference = r.value("reference", 0.0);
    if (r.contains("ours") && r["ours"].is_number()) row.ours = r["ours"].get<double>();
    if (r.contains("delta") && r["delta"].is_number()) row.delta = r["delta"].get<double>();
    report.comparison.push_back(std::move(row));
  }
  return report;
}

// --- run ----------------------------------------------------------------------

EvalReport run(const datasets::Corpus& corpus, const RunConfig& config, llm::Gateway& gateway,
               const RunOptions& options) {
  const TaskKind task = corpus.manifest.task;
  const TaskFamily family = family_of(task);
  if (auto problems = validate_run_config(config, task); !problems.empty()) {
    throw ContractViolation("invalid run configuration: " + join(problems, "; "));
  }

  const auto started = std::chrono::system_clock::now();
  const auto calls_before = gateway.provider_calls();

  EvalReport report;
  report.task = task;
  report.config = config;
  report.corpus = corpus.manifest;
  report.corpus.instance_count = corpus.instances.size();
  if (report.corpus.content_hash.empty()) report.corpus.content_hash = datasets::content_hash(corpus.instances);
  report.backend = gateway.backend().name();
  report.started_at = utc_timestamp(std::chrono::system_clock::to_time_t(started));

  const auto instances = sorted_instances(corpus);
  const auto pool = user_pool(instances);
  const bool zero_shot = config.setting == Setting::kZeroShot;
  const bool multi = config.setting == Setting::kMultiAuthor;

  std::vector<Plan> plans(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Plan& plan = plans[i];
    plan.instance = instances[i];
    plan.artifact.instance_id = instances[i]->instance_id;
    auto ordered = instances[i]->ordered_authors();
    const std::uint64_t seed = derive_seed(config.seed, instances[i]->instance_id);
    if (multi) {
      plan.authors = gisting::permute_authors(ordered, config.ablation, derive_seed(seed, "permute"));
    } else if (!ordered.empty()) {
      plan.authors = {ordered.front()};
      plan.authors.front().position = 0;
    }
    plan.artifact.author_order = ids_of(plan.authors);
    plan.artifact.profile_fingerprint = sequence_fingerprint(plan.artifact.author_order);
    if (task == TaskKind::kLamp3 && !zero_shot && !ordered.empty()) {
      auto it = instances[i]->histories.find(ordered.front().user_id);
      if (it != instances[i]->histories.end()) plan.fallback_rating = prompt::most_common_rating(it->second);
    }
  }

  // Gists: every author of every instance, plus the donor pool for profile_random.
  std::map<std::string, GistOutcome> gists;
  if (!zero_shot && task != TaskKind::kUp0) {
    std::vector<const UserHistory*> needed;
    for (auto& plan : plans) {
      for (const auto& author : plan.authors) {
        auto it = plan.instance->histories.find(author.user_id);
        if (it != plan.instance->histories.end()) needed.push_back(&it->second);
      }
    }
    if (config.ablation == Ablation::kProfileRandom) {
      for (const auto& [_, history] : pool) needed.push_back(history);
    }
    gists = gist_histories(needed, family, config, gateway, false);
  }

  // Prompts.
  const prompt::TemplateId template_id = prompt::template_for(task);
  for (auto& plan : plans) {
    const TaskInstance& instance = *plan.instance;
    InstanceArtifact& art = plan.artifact;
    const std::uint64_t seed = derive_seed(config.seed, instance.instance_id);
    std::string stage = "profile";
    try {
      prompt::TaskPromptInput input;
      if (task == TaskKind::kUp0) {
        stage = "prompt";
        const UserHistory& history = history_of(instance, plan.authors.at(0).user_id);
        prompt::SnippetGroup group;
        auto entries = gisting::select_gist_entries(history, config.max_gist_examples);
        for (std::size_t e = 0; e < entries.size(); ++e) {
          retrieval::RetrievedSnippet snippet;
          snippet.source_user = history.user_id;
          snippet.entry_index = history.entries.size() - 1 - e;
          snippet.entry = entries[e];
          snippet.rank = static_cast<int>(e + 1);
          group.snippets.push_back(std::move(snippet));
        }
        art.retrieved.push_back({});
        for (const auto& s : group.snippets) art.retrieved.back().push_back(s.id());
        input.snippets.push_back(std::move(group));
      } else if (!zero_shot) {
        gisting::ProfileParts parts;
        for (const auto& author : plan.authors) {
          const UserHistory& history = history_of(instance, author.user_id);
          const GistOutcome& outcome = gists.at(gist_key(history));
          if (!outcome.result) throw Error(ErrorCode::kGateway, "gist for " + author.user_id + " failed: " + outcome.error);
          for (const auto& w : outcome.result->warnings) art.warnings.push_back(author.user_id + ": " + w);
          parts.emplace_back(author.user_id, outcome.result->profile);
        }

        std::vector<UserProfile> donors;
        if (config.ablation == Ablation::kProfileRandom) {
          std::set<std::string> own(art.author_order.begin(), art.author_order.end());
          for (const auto& [user, history] : pool) {
            if (own.count(user) != 0) continue;
            const GistOutcome& outcome = gists.at(gist_key(*history));
            if (outcome.result) donors.push_back(outcome.result->profile);
          }
        }
        auto ablated = gisting::ablate_profiles(parts, config.ablation, donors, derive_seed(seed, "donors"));
        for (std::size_t a = 0; a < parts.size(); ++a) {
          art.profile_sources[parts[a].first] = ablated ? (*ablated)[a].second.user_id : "";
        }

        stage = "retrieve";
        auto retrieved = retrieval::retrieve_multi(instance.histories, plan.authors, instance.input,
                                                   config.k_for(task));
        for (std::size_t a = 0; a < retrieved.size(); ++a) {
          prompt::SnippetGroup group;
          if (multi && family == TaskFamily::kPsw) {
            group.label = "Author " + std::to_string(a + 1) + " (" + plan.authors[a].user_id + "):";
          }
          art.retrieved.emplace_back();
          for (const auto& s : retrieved[a]) art.retrieved.back().push_back(s.id());
          group.snippets = std::move(retrieved[a]);
          input.snippets.push_back(std::move(group));
        }

        stage = "compose";
        if (ablated) {
          if (family == TaskFamily::kLamp) {
            input.profile = ablated->front().second;
            const std::string source = ablated->front().second.user_id;
            if (auto it = instance.histories.find(source); it != instance.histories.end()) {
              input.history = &it->second;
            } else if (auto p = pool.find(source); p != pool.end()) {
              input.history = p->second;
            }
          } else {
            auto composed = gisting::compose(*ablated, config.render_roles ? &plan.authors : nullptr);
            art.profile_fingerprint = composed.order_fingerprint;
            art.composed_profile = composed.text;
            input.composed_profile = composed.text;
          }
        }
      }

      stage = "prompt";
      auto bundle = prompt::render(template_id, prompt::task_binding(instance, input));
      art.prompt.template_id = std::string(prompt::to_string(template_id));
      art.prompt.sections = bundle.sections;
      art.prompt.binding_hash = bundle.binding_hash;
      art.prompt.prompt_hash = sha256_hex(bundle.user);
      art.prompt.text = bundle.user;

      llm::CompletionRequest request;
      request.model_id = config.model_id;
      request.prompt = std::move(bundle);
      request.temperature = config.temperature;
      request.max_tokens = config.max_tokens;
      art.request_key = request.key();
      plan.request = std::move(request);
    } catch (const std::exception& e) {
      plan.fail(stage, e.what());
    }
  }

  // Generation.
  {
    std::vector<llm::CompletionRequest> requests;
    std::vector<Plan*> owners;
    for (auto& plan : plans) {
      if (!plan.request) continue;
      requests.push_back(*plan.request);
      owners.push_back(&plan);
    }
    auto batch = gateway.complete_batch(requests, config.max_in_flight);
    for (const auto& failure : batch.failures) owners[failure.index]->fail("generate", failure.message);
    for (std::size_t i = 0; i < owners.size(); ++i) {
      const auto& response = batch.responses[i];
      if (!response) continue;
      Plan& plan = *owners[i];
      plan.artifact.response_hash = sha256_hex(response->text);
      plan.artifact.cached = response->cached;
      try {
        score(plan, task, response->text, config);
      } catch (const std::exception& e) {
        plan.fail("score", e.what());
      }
    }
  }

  // Judge.
  if (is_judged(task)) {
    std::vector<llm::CompletionRequest> requests;
    std::vector<Plan*> owners;
    for (auto& plan : plans) {
      if (!plan.artifact.ok()) continue;
      try {
        auto bundle = prompt::render_geval(plan.artifact.prediction, judge_references(plan.artifact.reference));
        for (int s = 0; s < config.judge_samples; ++s) {
          llm::CompletionRequest request;
          request.model_id = config.judge_model_id;
          request.prompt = bundle;
          request.temperature = config.judge_temperature;
          request.max_tokens = config.judge_max_tokens;
          request.sample = s;
          plan.artifact.judge_request_keys.push_back(request.key());
          requests.push_back(std::move(request));
          owners.push_back(&plan);
        }
      } catch (const std::exception& e) {
        plan.fail("judge", e.what());
      }
    }
    auto batch = gateway.complete_batch(requests, config.max_in_flight);
    for (const auto& failure : batch.failures) owners[failure.index]->fail("judge", failure.message);

    std::map<Plan*, std::vector<metrics::GevalScores>> samples;
    for (std::size_t i = 0; i < owners.size(); ++i) {
      Plan* plan = owners[i];
      if (!batch.responses[i] || !plan->artifact.ok()) continue;
      try {
        samples[plan].push_back(metrics::parse_geval(batch.responses[i]->text));
      } catch (const std::exception& e) {
        plan->fail("judge", e.what());
      }
    }
    for (auto& plan : plans) {
      auto it = samples.find(&plan);
      if (!plan.artifact.ok() || it == samples.end()) continue;
      auto scores = metrics::average_geval(it->second);
      for (const auto& sample : it->second) {
        for (const auto& w : sample.warnings) plan.artifact.warnings.push_back("judge: " + w);
      }
      plan.artifact.metrics["consistency"] = scores.consistency;
      plan.artifact.metrics["fluency"] = scores.fluency;
      plan.artifact.metrics["relevance"] = scores.relevance;
      plan.artifact.metrics["novelty"] = scores.novelty;
    }
  }

  // Aggregate in instance-id order.
  std::vector<std::string> preds, refs;
  std::vector<double> rating_preds, rating_refs;
  for (auto& plan : plans) {
    InstanceArtifact& art = plan.artifact;
    if (!art.ok()) {
      ++report.errors;
      report.instances.push_back(std::move(art));
      continue;
    }
    for (const auto& [name, value] : art.metrics) report.metrics.add(art.instance_id, name, value);
    preds.push_back(art.prediction);
    refs.push_back(art.reference);
    if (task == TaskKind::kLamp3) {
      rating_preds.push_back(std::stod(art.prediction));
      rating_refs.push_back(std::get<Rating>(plan.instance->target).value);
    }
    report.instances.push_back(std::move(art));
  }
  if (!preds.empty()) {
    if (is_classification(task)) {
      report.metrics.set_corpus_metric("accuracy", metrics::accuracy(preds, refs));
      report.metrics.set_corpus_metric("f1_macro", metrics::f1_macro(preds, refs));
    } else if (is_rating(task)) {
      report.metrics.set_corpus_metric("mae", metrics::mae(rating_preds, rating_refs));
      report.metrics.set_corpus_metric("rmse", metrics::rmse(rating_preds, rating_refs));
    }
  }

  const std::size_t n = plans.size();
  report.failed = n == 0 || static_cast<double>(report.errors) / static_cast<double>(n) > config.failure_threshold;
  if (options.reference && !options.reference->empty()) {
    report.comparison = compare(task, config.setting, config.ablation, report.metrics.summary(),
                                     *options.reference);
  }
  report.provider_calls = gateway.provider_calls() - calls_before;
  report.wall_clock_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                               std::chrono::system_clock::now() - started)
                                               .count());
  return report;
}

std::vector<EvalReport> ablate(const datasets::Corpus& corpus, RunConfig config, llm::Gateway& gateway,
                               const RunOptions& options) {
  config.setting = Setting::kMultiAuthor;
  std::vector<EvalReport> out;
  for (Ablation ablation : all_ablations()) {
    config.ablation = ablation;
    out.push_back(run(corpus, config, gateway, options));
  }
  return out;
}

std::string default_report_dir(const std::string& root, const EvalReport& report) {
  fs::path base = fs::path(root) / std::string(to_string(report.task)) /
                  std::string(to_string(report.config.setting)) /
                  std::string(to_string(report.config.ablation));
  fs::path dir = base / report.started_at;
  for (int n = 1; fs::exists(dir); ++n) dir = base / (report.started_at + "-" + std::to_string(n));
  return dir.string();
}

std::string write_report(const EvalReport& report, const std::string& dir) {
  const fs::path base(dir);
  const std::string json_path = (base / "report.json").string();
  detail::write_file_atomic(json_path, report.to_json().dump(2) + "\n");
  detail::write_file_atomic((base / "report.txt").string(), report.render());
  detail::write_file_atomic((base / "metrics.csv").string(), report.metrics.to_csv());
  detail::write_file_atomic((base / "run_meta.json").string(), report.meta_json().dump(2) + "\n");
  return json_path;
}

std::vector<gisting::GistResult> gist_corpus(const datasets::Corpus& corpus, const RunConfig& config,
                                             llm::Gateway& gateway, bool refresh) {
  const auto instances = sorted_instances(corpus);
  const auto pool = user_pool(instances);
  std::vector<const UserHistory*> histories;
  for (const auto& [_, history] : pool) histories.push_back(history);
  auto outcomes = gist_histories(histories, family_of(corpus.manifest.task), config, gateway, refresh);

  std::vector<gisting::GistResult> out;
  std::vector<std::string> failures;
  for (const UserHistory* history : histories) {
    const GistOutcome& outcome = outcomes.at(gist_key(*history));
    if (outcome.result) {
      out.push_back(*outcome.result);
    } else {
      failures.push_back(history->user_id + ": " + outcome.error);
    }
  }
  if (!failures.empty()) throw Error(ErrorCode::kRunFailed, "gisting failed for " + join(failures, "; "));
  return out;
}

}  // namespace gistkit::runner
