// Acceptance suite: one PASS/FAIL line per criterion, each with a pinned
// tolerance and runtime budget. Exit status is non-zero when any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gistkit/datasets.hpp"
#include "gistkit/gisting.hpp"
#include "gistkit/metrics.hpp"
#include "gistkit/prompt.hpp"
#include "gistkit/retrieval.hpp"
#include "gistkit/runner.hpp"
#include "gistkit/text.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gistkit;

namespace {

constexpr double kMetricTolerance = 1e-9;
constexpr double kScoreTolerance = 1e-9;
constexpr double kReferenceTolerance = 1e-12;

struct Context {
  std::string cli;
  fs::path data;
  fs::path source;
  fs::path scratch;
};

/// Collects the first few mismatches of a criterion.
class Failures {
 public:
  void add(const std::string& message) {
    if (messages_.size() < 5) messages_.push_back(message);
    ++count_;
  }
  bool empty() const { return count_ == 0; }
  std::string summary() const {
    std::string out = std::to_string(count_) + " mismatch(es): " + join(messages_, "; ");
    return out;
  }

 private:
  std::vector<std::string> messages_;
  std::size_t count_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run_cli(const Context& ctx, const std::string& args) {
  const std::string command = ctx.cli + " " + args + " 2>/dev/null";
  Outcome out;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return out;
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) out.output.append(buffer, n);
  const int status = pclose(pipe);
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::vector<fs::path> find_reports(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "report.json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

// --- criteria -------------------------------------------------------------------

void metric_oracles(const Context&, Failures& f) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 1000; ++i) {
    auto a = oracle::random_tokens(rng, 10, 4);
    auto b = oracle::random_tokens(rng, 10, 4);
    const auto dp = metrics::lcs_length(a, b);
    const auto brute = oracle::lcs_brute_force(a, b);
    if (dp != brute) f.add("lcs pair " + std::to_string(i) + ": " + std::to_string(dp) + " vs " + std::to_string(brute));
  }

  struct Case {
    std::string name;
    double got;
    double want;
  };
  const std::vector<Case> cases = {
      {"rouge1 identical", metrics::rouge1("a b c", "a b c"), 1.0},
      {"rouge1 disjoint", metrics::rouge1("a b", "c d"), 0.0},
      {"rouge1 the cat", metrics::rouge1("the cat sat", "the cat ran"), 2.0 / 3.0},
      {"rougeL dp table", metrics::rougeL("the cat sat on mat", "the cat on mat"), 2 * 1.0 * 0.8 / 1.8},
      {"rougeL reversal", metrics::rougeL("a b c", "c b a"), 1.0 / 3.0},
      {"accuracy", metrics::accuracy({"a", "a", "b"}, {"a", "b", "b"}), 2.0 / 3.0},
      {"f1_macro", metrics::f1_macro({"a", "a", "b"}, {"a", "b", "b"}), 2.0 / 3.0},
      {"f1_macro all correct", metrics::f1_macro({"a", "b"}, {"a", "b"}), 1.0},
      {"mae", metrics::mae({1, 3}, {2, 5}), 1.5},
      {"rmse", metrics::rmse({1, 3}, {2, 5}), std::sqrt(2.5)},
      {"mae single", metrics::mae({4}, {2}), 2.0},
      {"rmse single", metrics::rmse({4}, {2}), 2.0},
      {"mae identical", metrics::mae({1, 2}, {1, 2}), 0.0},
  };
  for (const auto& c : cases)
    if (!near(c.got, c.want, kMetricTolerance)) f.add(c.name + " = " + std::to_string(c.got));
}

void retrieval_equivalence(const Context&, Failures& f) {
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> ndocs(0, 50), kdist(0, 15);
  for (int trial = 0; trial < 200; ++trial) {
    UserHistory h{"u", {}};
    std::vector<std::vector<std::string>> docs;
    const int n = ndocs(rng);
    for (int i = 0; i < n; ++i) {
      auto tokens = oracle::random_tokens(rng, 20, 40);
      h.entries.push_back({oracle::joined(tokens), "", {}});
      docs.push_back(tokenize(retrieval::document_text(h.entries.back())));
    }
    const auto query = oracle::random_tokens(rng, 6, 40);
    const int k = kdist(rng);
    const auto got = retrieval::Bm25Index::build(h).retrieve(oracle::joined(query), k);
    const auto want = oracle::bm25_all_docs(docs, query, k);
    if (got.size() != want.size()) {
      f.add("trial " + std::to_string(trial) + ": size " + std::to_string(got.size()) + " vs " +
            std::to_string(want.size()));
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].entry_index != want[i].doc || !near(got[i].score, want[i].score, kScoreTolerance)) {
        f.add("trial " + std::to_string(trial) + " rank " + std::to_string(i + 1));
        break;
      }
    }
  }
}

void prompt_goldens(const Context& ctx, Failures& f) {
  const fs::path dir = ctx.source / "prompts" / "golden";
  const auto ids = prompt::all_template_ids();
  if (ids.size() != 15) f.add("expected 15 templates, have " + std::to_string(ids.size()));
  for (auto id : ids) {
    const std::string name(prompt::to_string(id));
    const auto binding_path = dir / (name + ".binding.json");
    const auto golden_path = dir / (name + ".txt");
    if (!fs::exists(binding_path) || !fs::exists(golden_path)) {
      f.add(name + ": golden files missing");
      continue;
    }
    const auto binding = prompt::binding_from_json(Json::parse(read_file(binding_path)));
    if (prompt::render(id, binding).user != read_file(golden_path)) f.add(name + ": bytes differ");
  }
  const std::vector<std::pair<std::string, std::string>> phrases = {
      {"lamp1", "Just answer with [1] or [2]"},
      {"geval", "Consistency (1-5)"},
      {"psw2", "top 3 research questions"},
  };
  for (const auto& [name, phrase] : phrases)
    if (read_file(dir / (name + ".txt")).find(phrase) == std::string::npos) f.add(name + ": missing '" + phrase + "'");
}

std::vector<std::string> ids_of(const std::vector<AuthorRole>& authors) {
  std::vector<std::string> out;
  for (const auto& a : authors) out.push_back(a.user_id);
  return out;
}

void ablation_invariants(const Context& ctx, Failures& f) {
  for (int l = 1; l <= 6; ++l) {
    std::vector<AuthorRole> authors;
    for (int i = 0; i < l; ++i) authors.push_back({"u" + std::to_string(i), AuthorRoleKind::kUnspecified, i});
    auto once = gisting::permute_authors(authors, Ablation::kSwapFirst, 0);
    auto rotated = ids_of(authors);
    std::rotate(rotated.begin(), rotated.begin() + 1, rotated.end());
    if (ids_of(once) != rotated) f.add("swap_first is not a left rotation at l=" + std::to_string(l));
    auto cur = authors;
    for (int i = 0; i < l; ++i) cur = gisting::permute_authors(cur, Ablation::kSwapFirst, 0);
    if (ids_of(cur) != ids_of(authors)) f.add("l rotations are not the identity at l=" + std::to_string(l));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto p = gisting::permute_authors(authors, Ablation::kSwapRandom, seed);
      auto sorted = ids_of(p);
      std::sort(sorted.begin(), sorted.end());
      if (sorted != ids_of(authors)) f.add("swap_random changed the id multiset");
      if (ids_of(p) != ids_of(gisting::permute_authors(authors, Ablation::kSwapRandom, seed)))
        f.add("swap_random not reproducible for seed " + std::to_string(seed));
    }
  }

  llm::Gateway gateway(std::make_shared<llm::MockBackend>());
  RunConfig config;
  config.seed = 7;
  config.ablation = Ablation::kProfileRemoved;
  for (const char* task : {"psw1", "psw4", "lamp5"}) {
    auto corpus = datasets::load_corpus((ctx.data / "fixtures" / (std::string(task) + ".json")).string());
    auto report = runner::run(corpus, config, gateway);
    for (const auto& art : report.instances) {
      if (!art.ok()) f.add(std::string(task) + "/" + art.instance_id + ": " + art.error);
      const bool has_section =
          std::find(art.prompt.sections.begin(), art.prompt.sections.end(), "User Profile") != art.prompt.sections.end();
      if (has_section || art.prompt.text.find("### User Profile") != std::string::npos)
        f.add(std::string(task) + "/" + art.instance_id + ": profile section present after profile_removed");
    }
  }

  config.ablation = Ablation::kProfileRandom;
  auto corpus = datasets::load_corpus((ctx.data / "fixtures" / "psw1.json").string());
  auto report = runner::run(corpus, config, gateway);
  for (const auto& art : report.instances) {
    std::set<std::string> donors;
    for (const auto& [author, donor] : art.profile_sources) donors.insert(donor);
    if (donors.size() != art.profile_sources.size()) f.add(art.instance_id + ": donor reused");
  }
  std::vector<UserProfile> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(UserProfile{"d" + std::to_string(i), {}, {}, {}, {}, {}, "p"});
  gisting::ProfileParts parts;
  for (int i = 0; i < 4; ++i) parts.push_back({"a" + std::to_string(i), UserProfile{}});
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto out = gisting::ablate_profiles(parts, Ablation::kProfileRandom, pool, seed);
    std::set<std::string> used;
    for (const auto& [_, p] : *out) used.insert(p.user_id);
    if (used.size() != parts.size()) f.add("donor reused for seed " + std::to_string(seed));
  }
}

void end_to_end_determinism(const Context& ctx, Failures& f) {
  for (const char* task : {"lamp3", "lamp5", "psw4"}) {
    std::vector<std::string> bodies;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto root = ctx.scratch / ("determinism-" + std::string(task) + "-" + std::to_string(attempt));
      const auto fixture = ctx.data / "fixtures" / (std::string(task) + ".json");
      auto r = run_cli(ctx, "run --task " + std::string(task) + " --corpus " + fixture.string() +
                                " --setting multi_author --seed 7 --backend mock --cache-dir " +
                                (root / "cache").string() + " --reports-dir " + (root / "reports").string());
      if (r.code != 0) {
        f.add(std::string(task) + ": run exited " + std::to_string(r.code));
        break;
      }
      auto reports = find_reports(root / "reports");
      if (reports.size() != 1) {
        f.add(std::string(task) + ": expected one report.json");
        break;
      }
      bodies.push_back(read_file(reports[0]));
    }
    if (bodies.size() == 2 && bodies[0] != bodies[1]) f.add(std::string(task) + ": reports differ");
  }

  // Order fingerprints over the 3-author PSW fixture, one sequence per variant.
  std::set<std::vector<std::string>> sequences;
  for (const char* ablation : {"none", "swap_first", "swap_random"}) {
    const auto root = ctx.scratch / ("fingerprint-" + std::string(ablation));
    auto r = run_cli(ctx, "run --task psw4 --corpus " + (ctx.data / "fixtures" / "psw4.json").string() +
                              " --setting multi_author --seed 7 --ablation " + ablation + " --cache-dir " +
                              (root / "cache").string() + " --reports-dir " + (root / "reports").string());
    auto reports = find_reports(root / "reports");
    if (r.code != 0 || reports.size() != 1) {
      f.add(std::string("psw4 ") + ablation + ": run failed");
      continue;
    }
    std::vector<std::string> seq;
    const Json report = Json::parse(read_file(reports[0]));
    for (const auto& inst : report["instances"]) {
      if (inst["author_order"].size() == 3) seq.push_back(inst["profile_fingerprint"].get<std::string>());
    }
    if (seq.empty()) f.add("psw4 fixture has no 3-author paper");
    sequences.insert(seq);
  }
  if (sequences.size() != 3) f.add("fingerprints coincide across order variants");
}

void dataset_stats(const Context& ctx, Failures& f) {
  const auto fixture = ctx.data / "fixtures" / "psw4.json";
  auto r = run_cli(ctx, "dataset stats " + fixture.string());
  if (r.code != 0) {
    f.add("dataset stats exited " + std::to_string(r.code));
    return;
  }
  const auto precomputed =
      datasets::stats_from_json(Json::parse(read_file(ctx.data / "fixtures" / "psw4.stats.json")));
  if (r.output != datasets::stats_csv(precomputed)) f.add("CSV differs from the precomputed statistics");
  if (!(datasets::compute_stats(datasets::load_corpus(fixture.string())) == precomputed))
    f.add("computed statistics differ from the precomputed ones");
  for (const char* label : {"Avg. Authors / Paper", "Avg. History Papers / Author"})
    if (r.output.find(std::string("\n") + label + ",") == std::string::npos) f.add(std::string("row missing: ") + label);
}

void reference_ingestion(const Context& ctx, Failures& f) {
  const auto reference = (ctx.data / "reference" / "published_results.json").string();
  struct Expect {
    std::string task, source, method, setting, metric;
    double value;
  };
  const std::vector<Expect> expected = {
      {"lamp3", "lamp_main", "ours", "single_author", "mae", 0.274},
      {"lamp3", "lamp_main", "ours", "single_author", "rmse", 0.559},
      {"psw4", "psw_main", "multi_author", "multi_author", "rouge1", 0.505},
      {"psw4", "psw_main", "multi_author", "multi_author", "rougeL", 0.444},
  };
  for (const char* task : {"lamp3", "psw4"}) {
    auto text = run_cli(ctx, "report compare --reference " + reference + " --task " + task);
    if (text.code != 0 || text.output.empty()) f.add(std::string(task) + ": text comparison failed");
    auto json = run_cli(ctx, "report compare --json --reference " + reference + " --task " + task);
    if (json.code != 0) {
      f.add(std::string(task) + ": json comparison failed");
      continue;
    }
    const auto rows = Json::parse(json.output);
    for (const auto& e : expected) {
      if (e.task != task) continue;
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const Json& row) {
        return row["source"] == e.source && row["method"] == e.method && row["setting"] == e.setting &&
               row["metric"] == e.metric && row["ablation"] == "none";
      });
      if (it == rows.end()) {
        f.add(e.task + " " + e.method + " " + e.metric + ": row missing");
      } else if (!near((*it)["reference"].get<double>(), e.value, kReferenceTolerance)) {
        f.add(e.task + " " + e.metric + " = " + (*it)["reference"].dump());
      }
      std::ostringstream shown;
      shown << e.value;
      if (text.output.find(shown.str()) == std::string::npos) f.add(e.task + " " + e.metric + ": not rendered");
    }
  }
}

void judge_parsing(const Context&, Failures& f) {
  auto clean = metrics::parse_geval(R"({"consistency":4,"fluency":2,"relevance":4,"novelty":2})");
  if (clean.consistency != 4 || clean.fluency != 2 || clean.relevance != 4 || clean.novelty != 2 ||
      !clean.warnings.empty())
    f.add("clean JSON");
  auto wrapped = metrics::parse_geval(
      "The prediction stays close to the references.\n"
      R"({"consistency": 3, "fluency": 3, "relevance": 5, "novelty": 1})"
      "\nThat concludes the review.");
  if (wrapped.consistency != 3 || wrapped.fluency != 3 || wrapped.relevance != 5 || wrapped.novelty != 1)
    f.add("prose-wrapped JSON");
  auto clamped = metrics::parse_geval(R"({"consistency":7,"fluency":2,"relevance":4,"novelty":2})");
  if (clamped.consistency != 5 || !clamped.clamped()) f.add("out-of-range clamp");
}

struct Criterion {
  std::string name;
  double budget_s;
  std::function<void(const Context&, Failures&)> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gistkit acceptance suite"};
  Context ctx;
  std::string data = std::string(GISTKIT_SOURCE_DIR) + "/data";
  app.add_option("--cli", ctx.cli, "Path to the gistkit executable")->required();
  app.add_option("--data", data, "Data directory holding fixtures/ and reference/");
  CLI11_PARSE(app, argc, argv);
  ctx.data = data;
  ctx.source = GISTKIT_SOURCE_DIR;
  ctx.scratch = fs::temp_directory_path() / ("gistkit-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(ctx.scratch);

  const std::vector<Criterion> criteria = {
      {"Metric oracle suite", 30, metric_oracles},
      {"Retrieval equivalence", 30, retrieval_equivalence},
      {"Prompt golden files", 5, prompt_goldens},
      {"Ablation invariants", 5, ablation_invariants},
      {"End-to-end determinism", 60, end_to_end_determinism},
      {"Dataset stats", 5, dataset_stats},
      {"Reference ingestion", 5, reference_ingestion},
      {"Judge parsing", 5, judge_parsing},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Failures failures;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.check(ctx, failures);
    } catch (const std::exception& e) {
      failures.add(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.budget_s) {
      std::ostringstream msg;
      msg << "took " << seconds << " s, budget " << c.budget_s << " s";
      failures.add(msg.str());
    }
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(2);
    line << (failures.empty() ? "[PASS] " : "[FAIL] ") << c.name << " (" << seconds << " s / " << c.budget_s << " s)";
    if (!failures.empty()) {
      line << ": " << failures.summary();
      ++failed;
    }
    std::cout << line.str() << std::endl;
  }

  std::error_code ec;
  fs::remove_all(ctx.scratch, ec);
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
