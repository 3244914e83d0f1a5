// gistkit command-line interface. Links only the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gistkit/gistkit.h"
#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;
constexpr int kExitUsage = 2;

const char* const kAblations[] = {"none", "swap_random", "swap_first", "profile_removed", "profile_random"};

/// A gk_status turned into an exception so each command reads straight through.
struct Failure {
  int exit_code;
  std::string message;
};

void check(gk_status status, const std::string& what, int exit_code = kExitRunFailed) {
  if (status == GK_OK) return;
  throw Failure{exit_code, what + ": " + gk_status_name(status) + ": " + gk_last_error()};
}

std::string take(char* text) {
  std::string out = text != nullptr ? text : "";
  gk_string_free(text);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Gateway = std::unique_ptr<gk_gateway, Deleter<gk_gateway, gk_gateway_free>>;
using Corpus = std::unique_ptr<gk_corpus, Deleter<gk_corpus, gk_corpus_free>>;
using Report = std::unique_ptr<gk_report, Deleter<gk_report, gk_report_free>>;
using Reference = std::unique_ptr<gk_reference, Deleter<gk_reference, gk_reference_free>>;

std::string data_dir() {
  if (const char* env = std::getenv("GISTKIT_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return GISTKIT_DATA_DIR;
}

struct GlobalArgs {
  std::string config_file;
  std::string backend = "mock";
  std::string cache_dir = ".gistkit/cache";
};

struct RunArgs {
  std::string task;
  std::string corpus;
  std::string setting = "multi_author";
  std::string ablation = "none";
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<std::string> model;
  std::optional<std::string> judge_model;
  std::optional<int> judge_samples;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<int> max_gist_examples;
  std::optional<int> max_in_flight;
  std::optional<double> failure_threshold;
  bool render_roles = false;
  bool stem = false;
  std::string reference;
  std::string out;
  std::string reports_dir = "reports";
  bool refresh = false;
};

void add_run_options(CLI::App* sub, RunArgs& args, bool with_setting) {
  sub->add_option("--task", args.task, "Task id (lamp1..lamp7, up0, psw1..psw4)");
  sub->add_option("--corpus", args.corpus, "Corpus file (default: bundled fixture for the task)");
  if (with_setting) {
    sub->add_option("--setting", args.setting, "zero_shot | single_author | multi_author");
    sub->add_option("--ablation", args.ablation,
                    "none | swap_random | swap_first | profile_removed | profile_random");
  }
  sub->add_option("--seed", args.seed, "Run seed");
  sub->add_option("--k", args.k, "Snippets retrieved per author");
  sub->add_option("--model", args.model, "Generation model id");
  sub->add_option("--judge-model", args.judge_model, "Judge model id");
  sub->add_option("--judge-samples", args.judge_samples, "Judge calls averaged per instance");
  sub->add_option("--temperature", args.temperature, "Generation temperature");
  sub->add_option("--max-tokens", args.max_tokens, "Generation token limit");
  sub->add_option("--max-gist-examples", args.max_gist_examples, "History entries shown to the gist prompt");
  sub->add_option("--max-in-flight", args.max_in_flight, "Concurrent provider calls");
  sub->add_option("--failure-threshold", args.failure_threshold, "Tolerated fraction of failed instances");
  sub->add_flag("--render-roles", args.render_roles, "Name author roles in composed profiles");
  sub->add_flag("--stem", args.stem, "Porter-stem tokens before ROUGE");
  sub->add_option("--reference", args.reference, "Reference table to compare against");
  sub->add_option("--reports-dir", args.reports_dir, "Root of the report tree");
}

Json config_json(const RunArgs& args, const GlobalArgs& global) {
  Json config = {{"setting", args.setting}, {"ablation", args.ablation}, {"cache_dir", global.cache_dir}};
  if (args.seed) config["seed"] = *args.seed;
  if (args.k) config["k_retrieve"] = *args.k;
  if (args.model) config["model_id"] = *args.model;
  if (args.judge_model) config["judge_model_id"] = *args.judge_model;
  if (args.judge_samples) config["judge_samples"] = *args.judge_samples;
  if (args.temperature) config["temperature"] = *args.temperature;
  if (args.max_tokens) config["max_tokens"] = *args.max_tokens;
  if (args.max_gist_examples) config["max_gist_examples"] = *args.max_gist_examples;
  if (args.max_in_flight) config["max_in_flight"] = *args.max_in_flight;
  if (args.failure_threshold) config["failure_threshold"] = *args.failure_threshold;
  config["render_roles"] = args.render_roles;
  config["stemming"] = args.stem;
  return config;
}

/// Applies a key = value config file: a key fills an option of the active
/// subcommand (or a global one) only when the command line left it unset.
void apply_config_file(const std::string& path, CLI::App& app, const std::vector<CLI::App*>& chain) {
  CLI::ConfigINI reader;
  std::vector<CLI::ConfigItem> items;
  try {
    items = reader.from_file(path);
  } catch (const CLI::Error& e) {
    throw Failure{kExitUsage, "cannot read config file " + path + ": " + e.what()};
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string name = item.name;
    for (char& c : name) c = c == '_' ? '-' : c;
    CLI::Option* option = nullptr;
    for (auto it = chain.rbegin(); it != chain.rend() && option == nullptr; ++it) {
      option = (*it)->get_option_no_throw("--" + name);
    }
    if (option == nullptr) option = app.get_option_no_throw("--" + name);
    if (option == nullptr) throw Failure{kExitUsage, "unknown config key '" + item.name + "' in " + path};
    if (option->count() > 0) continue;
    for (const auto& value : item.inputs) option->add_result(value);
    try {
      option->run_callback();
    } catch (const CLI::Error& e) {
      throw Failure{kExitUsage, "config key '" + item.name + "': " + e.what()};
    }
  }
}

Gateway open_gateway(const GlobalArgs& global) {
  Json options = {{"cache_dir", global.cache_dir}};
  gk_gateway* raw = nullptr;
  check(gk_gateway_create(global.backend.c_str(), options.dump().c_str(), &raw), "gateway", kExitUsage);
  return Gateway(raw);
}

std::string default_corpus(const std::string& task) {
  return (fs::path(data_dir()) / "fixtures" / (task + ".json")).string();
}

Corpus open_corpus(const std::string& path, const std::string& task) {
  gk_corpus* raw = nullptr;
  check(gk_corpus_load(path.c_str(), task.empty() ? nullptr : task.c_str(), &raw), "corpus " + path);
  return Corpus(raw);
}

Reference open_reference(const std::string& path) {
  gk_reference* raw = nullptr;
  check(gk_reference_load(path.c_str(), &raw), "reference " + path);
  return Reference(raw);
}

void require_task(const RunArgs& args) {
  if (args.task.empty()) throw Failure{kExitUsage, "--task is required"};
}

void validate(const RunArgs& args, const Json& config) {
  char* problems = nullptr;
  gk_status status = gk_validate_config(args.task.c_str(), config.dump().c_str(), &problems);
  take(problems);
  if (status != GK_OK) throw Failure{kExitUsage, std::string("invalid combination: ") + gk_last_error()};
}

/// Runs one configuration and writes its report; returns true when the run failed.
bool run_one(gk_corpus* corpus, gk_gateway* gateway, const Json& config, const gk_reference* reference,
             const std::string& dir_override, const std::string& reports_dir) {
  gk_report* raw = nullptr;
  gk_status status = gk_run(corpus, gateway, config.dump().c_str(), reference, &raw);
  check(status, "run", status == GK_CONTRACT_VIOLATION ? kExitUsage : kExitRunFailed);
  Report report(raw);

  std::string dir = dir_override;
  if (dir.empty()) {
    char* out = nullptr;
    check(gk_report_default_dir(report.get(), reports_dir.c_str(), &out), "report dir");
    dir = take(out);
  }
  char* path = nullptr;
  check(gk_report_write(report.get(), dir.c_str(), &path), "write report");
  char* text = nullptr;
  check(gk_report_text(report.get(), &text), "render report");
  std::cout << take(text) << "report: " << take(path) << "\n";
  return gk_report_failed(report.get()) != 0;
}

int cmd_run(const RunArgs& args, const GlobalArgs& global) {
  require_task(args);
  Json config = config_json(args, global);
  validate(args, config);
  Corpus corpus = open_corpus(args.corpus.empty() ? default_corpus(args.task) : args.corpus, args.task);
  Gateway gateway = open_gateway(global);
  Reference reference;
  if (!args.reference.empty()) reference = open_reference(args.reference);
  const bool failed = run_one(corpus.get(), gateway.get(), config, reference.get(), args.out, args.reports_dir);
  if (failed) std::cerr << "run failed: error fraction above threshold\n";
  return failed ? kExitRunFailed : kExitOk;
}

int cmd_ablate(RunArgs args, const GlobalArgs& global) {
  require_task(args);
  args.setting = "multi_author";
  Corpus corpus = open_corpus(args.corpus.empty() ? default_corpus(args.task) : args.corpus, args.task);
  Gateway gateway = open_gateway(global);
  Reference reference;
  if (!args.reference.empty()) reference = open_reference(args.reference);
  bool any_failed = false;
  for (const char* ablation : kAblations) {
    args.ablation = ablation;
    Json config = config_json(args, global);
    validate(args, config);
    std::cout << "== " << ablation << "\n";
    any_failed = run_one(corpus.get(), gateway.get(), config, reference.get(), "", args.reports_dir) || any_failed;
  }
  return any_failed ? kExitRunFailed : kExitOk;
}

int cmd_gist(const RunArgs& args, const GlobalArgs& global) {
  require_task(args);
  Json config = config_json(args, global);
  config["setting"] = "multi_author";
  config["ablation"] = "none";
  Corpus corpus = open_corpus(args.corpus.empty() ? default_corpus(args.task) : args.corpus, args.task);
  Gateway gateway = open_gateway(global);
  char* out = nullptr;
  check(gk_gist_corpus(corpus.get(), gateway.get(), config.dump().c_str(), args.refresh ? 1 : 0, &out), "gist");
  const std::string profiles = take(out);
  if (args.out.empty()) {
    std::cout << profiles << "\n";
  } else {
    std::FILE* f = std::fopen(args.out.c_str(), "wb");
    if (f == nullptr) throw Failure{kExitRunFailed, "cannot write " + args.out};
    std::fputs(profiles.c_str(), f);
    std::fputs("\n", f);
    std::fclose(f);
    std::cout << "profiles: " << args.out << "\n";
  }
  return kExitOk;
}

struct DatasetArgs {
  std::string corpus;
  std::string column = "value";
  bool json = false;
  std::string query;
  std::string out_dir;
  std::string name = "psw";
  int min_year = 2001;
  int max_papers = 100;
  int history_limit = 20;
  std::uint64_t seed = 0;
  std::vector<double> ratios{0.8, 0.1, 0.1};
};

int cmd_dataset_stats(const DatasetArgs& args) {
  Corpus corpus = open_corpus(args.corpus, "");
  char* out = nullptr;
  if (args.json) {
    check(gk_corpus_stats_json(corpus.get(), &out), "stats");
  } else {
    check(gk_corpus_stats_csv(corpus.get(), args.column.c_str(), &out), "stats");
  }
  std::cout << take(out);
  if (args.json) std::cout << "\n";
  return kExitOk;
}

int cmd_dataset_validate(const DatasetArgs& args) {
  char* out = nullptr;
  gk_status status = gk_corpus_validate_file(args.corpus.c_str(), &out);
  const std::string problems = take(out);
  if (status == GK_OK) {
    std::cout << args.corpus << ": ok\n";
    return kExitOk;
  }
  if (problems.empty()) check(status, "validate");
  for (const auto& problem : Json::parse(problems)) std::cout << problem.get<std::string>() << "\n";
  return kExitRunFailed;
}

int cmd_dataset_build(const DatasetArgs& args) {
  if (args.query.empty() || args.out_dir.empty()) throw Failure{kExitUsage, "--query and --out are required"};
  if (args.ratios.size() != 3) throw Failure{kExitUsage, "--ratios takes three values"};
  Json options = {{"query", args.query},         {"out_dir", args.out_dir},
                  {"name", args.name},           {"min_year", args.min_year},
                  {"max_papers", args.max_papers}, {"history_limit", args.history_limit},
                  {"seed", args.seed},           {"ratios", args.ratios}};
  char* out = nullptr;
  check(gk_dataset_build_psw(options.dump().c_str(), &out), "dataset build");
  std::cout << take(out) << "\n";
  return kExitOk;
}

struct CompareArgs {
  std::string report;
  std::string reference;
  std::string task;
  bool json = false;
};

int cmd_report_compare(const CompareArgs& args) {
  const std::string path = args.reference.empty()
                               ? (fs::path(data_dir()) / "reference" / "published_results.json").string()
                               : args.reference;
  Reference reference = open_reference(path);
  Report report;
  if (!args.report.empty()) {
    gk_report* raw = nullptr;
    check(gk_report_load(args.report.c_str(), &raw), "report " + args.report);
    report.reset(raw);
  }
  char* text = nullptr;
  char* json = nullptr;
  check(gk_compare(report.get(), reference.get(), args.task.empty() ? nullptr : args.task.c_str(), &text, &json),
        "compare", kExitUsage);
  const std::string rendered = take(text);
  const std::string rows = take(json);
  std::cout << (args.json ? rows + "\n" : rendered);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gistkit: profile-conditioned generation runs, datasets and reports"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalArgs global;
  app.add_option("--config", global.config_file, "key = value file; command-line flags take precedence");
  app.add_option("--backend", global.backend, "mock | remote")->check(CLI::IsMember({"mock", "remote"}));
  app.add_option("--cache-dir", global.cache_dir, "Response and profile cache directory");
  app.add_flag_callback("--version", [] {
    std::cout << "gistkit " << gk_version() << "\n";
    throw CLI::Success();
  });

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one task/setting/ablation and write its report");
  add_run_options(run, run_args, true);
  run->add_option("--out", run_args.out, "Report directory (default: <reports-dir>/<task>/<setting>/<ablation>/<timestamp>)");

  RunArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Run all five ablation variants in the multi-author setting");
  add_run_options(ablate, ablate_args, false);

  RunArgs gist_args;
  auto* gist = app.add_subcommand("gist", "Build or refresh the profile of every corpus user");
  add_run_options(gist, gist_args, false);
  gist->add_flag("--refresh", gist_args.refresh, "Ignore stored profiles");
  gist->add_option("--out", gist_args.out, "Write profiles JSON here instead of stdout");

  DatasetArgs dataset_args;
  auto* dataset = app.add_subcommand("dataset", "Corpus construction and inspection");
  dataset->require_subcommand(1);
  auto* stats = dataset->add_subcommand("stats", "Print corpus statistics");
  stats->add_option("corpus", dataset_args.corpus, "Corpus file")->required();
  stats->add_option("--column", dataset_args.column, "CSV value column name");
  stats->add_flag("--json", dataset_args.json, "JSON instead of CSV");
  auto* validate_cmd = dataset->add_subcommand("validate", "Check a corpus file");
  validate_cmd->add_option("corpus", dataset_args.corpus, "Corpus file")->required();
  auto* build = dataset->add_subcommand("build", "Build PSW corpora from Semantic Scholar");
  build->add_option("--query", dataset_args.query, "Search query");
  build->add_option("--out", dataset_args.out_dir, "Output directory");
  build->add_option("--name", dataset_args.name, "Corpus name");
  build->add_option("--min-year", dataset_args.min_year, "Earliest publication year");
  build->add_option("--max-papers", dataset_args.max_papers, "Papers to fetch");
  build->add_option("--history-limit", dataset_args.history_limit, "History papers per author");
  build->add_option("--seed", dataset_args.seed, "Split seed");
  build->add_option("--ratios", dataset_args.ratios, "train valid test ratios")->expected(3);

  CompareArgs compare_args;
  auto* report = app.add_subcommand("report", "Report utilities");
  report->require_subcommand(1);
  auto* compare = report->add_subcommand("compare", "Show reference numbers, optionally beside a report");
  compare->add_option("--report", compare_args.report, "report.json to compare");
  compare->add_option("--reference", compare_args.reference, "Reference table (default: bundled)");
  compare->add_option("--task", compare_args.task, "Only rows for this task");
  compare->add_flag("--json", compare_args.json, "JSON rows instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::vector<CLI::App*> chain;
    for (CLI::App* sub = &app; !sub->get_subcommands().empty();) {
      sub = sub->get_subcommands().front();
      chain.push_back(sub);
    }
    if (!global.config_file.empty()) apply_config_file(global.config_file, app, chain);

    if (run->parsed()) return cmd_run(run_args, global);
    if (ablate->parsed()) return cmd_ablate(ablate_args, global);
    if (gist->parsed()) return cmd_gist(gist_args, global);
    if (stats->parsed()) return cmd_dataset_stats(dataset_args);
    if (validate_cmd->parsed()) return cmd_dataset_validate(dataset_args);
    if (build->parsed()) return cmd_dataset_build(dataset_args);
    if (compare->parsed()) return cmd_report_compare(compare_args);
  } catch (const Failure& f) {
    std::cerr << "gistkit: " << f.message << "\n";
    return f.exit_code;
  }
  return kExitUsage;
}
