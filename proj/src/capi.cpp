#include "gistkit/gistkit.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "fs_util.hpp"
#include "gistkit/datasets.hpp"
#include "gistkit/errors.hpp"
#include "gistkit/gisting.hpp"
#include "gistkit/llm.hpp"
#include "gistkit/metrics.hpp"
#include "gistkit/prompt.hpp"
#include "gistkit/runner.hpp"
#include "gistkit/text.hpp"

using namespace gistkit;

struct gk_gateway {
  std::shared_ptr<llm::Backend> backend;
  std::unique_ptr<llm::Gateway> gateway;
};

struct gk_corpus {
  datasets::Corpus corpus;
};

struct gk_report {
  runner::EvalReport report;
};

struct gk_reference {
  runner::ReferenceTable table;
};

namespace {

thread_local std::string last_error;

gk_status status_of(ErrorCode code) { return static_cast<gk_status>(static_cast<int>(code)); }

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require(const void* pointer, const char* name) {
  if (pointer == nullptr) throw InvalidArgument(std::string(name) + " is NULL");
}

template <typename F>
gk_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return GK_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const InvalidArgument& e) {
    last_error = e.what();
    return GK_INVALID_ARGUMENT;
  } catch (const Json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return GK_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GK_INTERNAL;
  }
}

char* copy_out(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

void set_out(char** out, const std::string& text) {
  if (out != nullptr) *out = copy_out(text);
}

Json parse_json(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return Json::object();
  Json json = Json::parse(text, nullptr, false);
  if (json.is_discarded() || !json.is_object()) {
    throw InvalidArgument(std::string(what) + " is not a JSON object");
  }
  return json;
}

RunConfig parse_config(const char* config_json) { return run_config_from_json(parse_json(config_json, "config")); }

}  // namespace

extern "C" {

const char* gk_version(void) { return "0.1.0"; }

const char* gk_last_error(void) { return last_error.c_str(); }

const char* gk_status_name(gk_status status) {
  switch (status) {
    case GK_OK: return "ok";
    case GK_CONTRACT_VIOLATION: return "contract_violation";
    case GK_EMPTY_HISTORY: return "empty_history";
    case GK_GATEWAY: return "gateway_error";
    case GK_PROTOCOL: return "protocol_error";
    case GK_JUDGE_PARSE: return "judge_parse_error";
    case GK_LOAD: return "load_error";
    case GK_INTEGRITY: return "integrity_error";
    case GK_EMPTY_CORPUS: return "empty_corpus";
    case GK_IO: return "io_error";
    case GK_NOT_IMPLEMENTED: return "not_implemented";
    case GK_RUN_FAILED: return "run_failed";
    case GK_INVALID_ARGUMENT: return "invalid_argument";
    case GK_INTERNAL: return "internal_error";
  }
  return "unknown";
}

void gk_string_free(char* text) { std::free(text); }

// --- gateway -----------------------------------------------------------------

gk_status gk_gateway_create(const char* backend, const char* options_json, gk_gateway** out) {
  return guarded([&] {
    require(backend, "backend");
    require(out, "out");
    Json options = parse_json(options_json, "gateway options");
    auto handle = std::make_unique<gk_gateway>();
    if (std::string(backend) == "mock" && options.contains("overrides")) {
      std::vector<llm::MockBackend::Override> overrides;
      for (const auto& o : options["overrides"]) {
        overrides.push_back({o.at("needle").get<std::string>(), o.at("reply").get<std::string>()});
      }
      handle->backend = std::make_shared<llm::MockBackend>(std::move(overrides));
    } else {
      handle->backend = llm::make_backend(backend);
    }
    llm::GatewayOptions gateway_options;
    gateway_options.cache_dir = options.value("cache_dir", "");
    gateway_options.max_attempts = options.value("max_attempts", gateway_options.max_attempts);
    gateway_options.base_delay =
        std::chrono::milliseconds(options.value("base_delay_ms", gateway_options.base_delay.count()));
    handle->gateway = std::make_unique<llm::Gateway>(handle->backend, gateway_options);
    *out = handle.release();
  });
}

void gk_gateway_free(gk_gateway* gateway) { delete gateway; }

gk_status gk_gateway_provider_calls(const gk_gateway* gateway, uint64_t* out) {
  return guarded([&] {
    require(gateway, "gateway");
    require(out, "out");
    *out = gateway->gateway->provider_calls();
  });
}

// --- corpora -----------------------------------------------------------------

gk_status gk_corpus_load(const char* path, const char* expected_task, gk_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::optional<TaskKind> task;
    if (expected_task != nullptr) {
      task = parse_task_kind(expected_task);
      if (!task) throw InvalidArgument(std::string("unknown task '") + expected_task + "'");
    }
    auto handle = std::make_unique<gk_corpus>();
    handle->corpus = datasets::load_corpus(path, task);
    *out = handle.release();
  });
}

void gk_corpus_free(gk_corpus* corpus) { delete corpus; }

gk_status gk_corpus_manifest(const gk_corpus* corpus, char** out_json) {
  return guarded([&] {
    require(corpus, "corpus");
    const auto& m = corpus->corpus.manifest;
    Json json = {{"name", m.name},
                 {"task", std::string(to_string(m.task))},
                 {"split", std::string(datasets::to_string(m.split))},
                 {"instance_count", corpus->corpus.instances.size()},
                 {"content_hash", m.content_hash}};
    set_out(out_json, json.dump());
  });
}

gk_status gk_corpus_validate_file(const char* path, char** out_json) {
  std::vector<std::string> problems;
  gk_status status = guarded([&] {
    require(path, "path");
    problems = datasets::validate_corpus_file(path);
    set_out(out_json, Json(problems).dump());
  });
  if (status == GK_OK && !problems.empty()) {
    last_error = problems.front();
    return GK_LOAD;
  }
  return status;
}

gk_status gk_corpus_stats_csv(const gk_corpus* corpus, const char* column, char** out_csv) {
  return guarded([&] {
    require(corpus, "corpus");
    set_out(out_csv, datasets::stats_csv(datasets::compute_stats(corpus->corpus),
                                         column != nullptr ? column : "value"));
  });
}

gk_status gk_corpus_stats_json(const gk_corpus* corpus, char** out_json) {
  return guarded([&] {
    require(corpus, "corpus");
    set_out(out_json, datasets::stats_to_json(datasets::compute_stats(corpus->corpus)).dump(2));
  });
}

gk_status gk_dataset_build_psw(const char* options_json, char** out_json) {
  return guarded([&] {
    Json json = parse_json(options_json, "build options");
    datasets::PswBuildOptions options;
    options.query = json.value("query", "");
    options.out_dir = json.value("out_dir", "");
    if (options.query.empty()) throw InvalidArgument("build options need a query");
    if (options.out_dir.empty()) throw InvalidArgument("build options need an out_dir");
    options.name = json.value("name", options.name);
    options.min_year = json.value("min_year", options.min_year);
    options.max_papers = json.value("max_papers", options.max_papers);
    options.history_limit = json.value("history_limit", options.history_limit);
    options.seed = json.value("seed", options.seed);
    if (json.contains("ratios")) options.ratios = json["ratios"].get<std::array<double, 3>>();

    datasets::SemanticScholarClient client(datasets::SemanticScholarClient::options_from_env());
    auto result = datasets::build_psw(client, options);
    set_out(out_json, Json{{"files", result.files},
                           {"private_map_path", result.private_map_path},
                           {"skipped", result.skipped},
                           {"failures", result.failures},
                           {"papers", result.papers}}
                          .dump(2));
  });
}

// --- runs --------------------------------------------------------------------

gk_status gk_validate_config(const char* task, const char* config_json, char** out_json) {
  std::vector<std::string> problems;
  gk_status status = guarded([&] {
    require(task, "task");
    auto kind = parse_task_kind(task);
    if (!kind) throw InvalidArgument(std::string("unknown task '") + task + "'");
    RunConfig config;
    try {
      config = parse_config(config_json);
    } catch (const ContractViolation& e) {
      problems.push_back(e.what());
    }
    if (problems.empty()) problems = validate_run_config(config, *kind);
    set_out(out_json, Json(problems).dump());
  });
  if (status == GK_OK && !problems.empty()) {
    last_error = join(problems, "; ");
    return GK_CONTRACT_VIOLATION;
  }
  return status;
}

gk_status gk_run(const gk_corpus* corpus, gk_gateway* gateway, const char* config_json,
                 const gk_reference* reference, gk_report** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(gateway, "gateway");
    require(out, "out");
    runner::RunOptions options;
    if (reference != nullptr) options.reference = reference->table;
    auto handle = std::make_unique<gk_report>();
    handle->report = runner::run(corpus->corpus, parse_config(config_json), *gateway->gateway, options);
    *out = handle.release();
  });
}

gk_status gk_gist_corpus(const gk_corpus* corpus, gk_gateway* gateway, const char* config_json,
                         int refresh, char** out_json) {
  return guarded([&] {
    require(corpus, "corpus");
    require(gateway, "gateway");
    auto results = runner::gist_corpus(corpus->corpus, parse_config(config_json), *gateway->gateway,
                                       refresh != 0);
    Json json = Json::array();
    for (const auto& r : results) json.push_back({{"profile", to_json(r.profile)}, {"warnings", r.warnings}});
    set_out(out_json, json.dump(2));
  });
}

void gk_report_free(gk_report* report) { delete report; }

int gk_report_failed(const gk_report* report) { return report != nullptr && report->report.failed ? 1 : 0; }

gk_status gk_report_json(const gk_report* report, char** out_json) {
  return guarded([&] {
    require(report, "report");
    set_out(out_json, report->report.to_json().dump(2) + "\n");
  });
}

gk_status gk_report_text(const gk_report* report, char** out_text) {
  return guarded([&] {
    require(report, "report");
    set_out(out_text, report->report.render());
  });
}

gk_status gk_report_csv(const gk_report* report, char** out_csv) {
  return guarded([&] {
    require(report, "report");
    set_out(out_csv, report->report.metrics.to_csv());
  });
}

gk_status gk_report_default_dir(const gk_report* report, const char* root, char** out_dir) {
  return guarded([&] {
    require(report, "report");
    require(root, "root");
    set_out(out_dir, runner::default_report_dir(root, report->report));
  });
}

gk_status gk_report_write(const gk_report* report, const char* dir, char** out_path) {
  return guarded([&] {
    require(report, "report");
    require(dir, "dir");
    set_out(out_path, runner::write_report(report->report, dir));
  });
}

gk_status gk_report_load(const char* path, gk_report** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto handle = std::make_unique<gk_report>();
    Json json = Json::parse(detail::read_file(path), nullptr, false);
    if (json.is_discarded()) throw LoadError(-1, "", std::string(path) + " is not valid JSON");
    handle->report = runner::report_from_json(json);
    *out = handle.release();
  });
}

// --- reference ---------------------------------------------------------------

gk_status gk_reference_load(const char* path, gk_reference** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto handle = std::make_unique<gk_reference>();
    handle->table = runner::load_reference(path);
    *out = handle.release();
  });
}

void gk_reference_free(gk_reference* reference) { delete reference; }

gk_status gk_compare(const gk_report* report, const gk_reference* reference, const char* task,
                     char** out_text, char** out_json) {
  return guarded([&] {
    require(reference, "reference");
    std::vector<runner::ComparisonRow> rows;
    if (report != nullptr) {
      const auto& r = report->report;
      rows = runner::compare(r.task, r.config.setting, r.config.ablation, r.metrics.summary(),
                             reference->table);
    } else {
      std::optional<TaskKind> filter;
      if (task != nullptr) {
        filter = parse_task_kind(task);
        if (!filter) throw InvalidArgument(std::string("unknown task '") + task + "'");
      }
      rows = runner::reference_rows(reference->table, filter);
    }
    set_out(out_text, runner::render_comparison(rows));
    set_out(out_json, runner::comparison_to_json(rows).dump(2));
  });
}

// --- prompts and judging -------------------------------------------------------

gk_status gk_render_prompt(const char* template_id, const char* binding_json, char** out_text) {
  return guarded([&] {
    require(template_id, "template_id");
    auto id = prompt::parse_template_id(template_id);
    if (!id) throw InvalidArgument(std::string("unknown template '") + template_id + "'");
    auto bundle = prompt::render(*id, prompt::binding_from_json(parse_json(binding_json, "binding")));
    set_out(out_text, bundle.user);
  });
}

gk_status gk_parse_geval(const char* judge_text, char** out_json) {
  return guarded([&] {
    require(judge_text, "judge_text");
    auto scores = metrics::parse_geval(judge_text);
    set_out(out_json, Json{{"consistency", scores.consistency},
                           {"fluency", scores.fluency},
                           {"relevance", scores.relevance},
                           {"novelty", scores.novelty},
                           {"warnings", scores.warnings}}
                          .dump());
  });
}

}  // extern "C"
