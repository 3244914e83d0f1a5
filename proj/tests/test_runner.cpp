#include "doctest.h"

#include "gistkit/hash.hpp"
#include "gistkit/runner.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace gistkit;
using namespace gistkit::runner;

namespace {

datasets::Corpus fixture(const std::string& name) {
  return datasets::load_corpus(testing::fixture(name + ".json").string());
}

llm::Gateway mock_gateway(std::vector<llm::MockBackend::Override> overrides = {}) {
  return llm::Gateway(std::make_shared<llm::MockBackend>(std::move(overrides)));
}

RunConfig config_with(Setting setting, Ablation ablation = Ablation::kNone, std::uint64_t seed = 7) {
  RunConfig c;
  c.setting = setting;
  c.ablation = ablation;
  c.seed = seed;
  return c;
}

class FailingBackend : public llm::Backend {
 public:
  std::string name() const override { return "failing"; }
  llm::ProviderReply call(const llm::CompletionRequest&) override { throw GatewayError(400, "rejected"); }
};

}  // namespace

TEST_SUITE("runner") {
  TEST_CASE("zero_shot on one instance stores rouge and no profile section") {
    auto corpus = fixture("lamp5");
    corpus.instances.resize(1);
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kZeroShot), gw);
    REQUIRE(report.instances.size() == 1);
    const auto& art = report.instances[0];
    REQUIRE(art.ok());
    CHECK(art.metrics.contains("rouge1"));
    CHECK(art.metrics.contains("rougeL"));
    CHECK(art.prompt.text.find("User Profile") == std::string::npos);
    CHECK(art.prompt.text.find("User History") == std::string::npos);
    CHECK(std::find(art.prompt.sections.begin(), art.prompt.sections.end(), "User Profile") ==
          art.prompt.sections.end());
    CHECK(report.metrics.summary().contains("rouge1"));
    CHECK_FALSE(report.failed);
  }

  TEST_CASE("swap_first fingerprint equals the rotated order fingerprint") {
    auto corpus = fixture("psw4");
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kMultiAuthor, Ablation::kSwapFirst), gw);
    REQUIRE(report.instances.size() == corpus.instances.size());
    for (const auto& art : report.instances) {
      REQUIRE(art.ok());
      const auto& inst = *std::find_if(corpus.instances.begin(), corpus.instances.end(),
                                       [&](const TaskInstance& i) { return i.instance_id == art.instance_id; });
      std::vector<std::string> ids;
      for (const auto& a : inst.ordered_authors()) ids.push_back(a.user_id);
      std::rotate(ids.begin(), ids.begin() + 1, ids.end());
      CHECK(art.author_order == ids);
      CHECK(art.profile_fingerprint == sequence_fingerprint(ids));
      CHECK(art.composed_profile.find("Author 1 (" + ids[0] + ")") != std::string::npos);
    }
  }

  TEST_CASE("order ablations give distinct fingerprint sequences on the three-author fixture") {
    // A seeded shuffle of three authors can land on the identity for a single
    // paper, so the comparison is over the fingerprints of the whole corpus.
    auto corpus = fixture("psw4");
    auto gw = mock_gateway();
    std::set<std::vector<std::string>> prints;
    for (auto ab : {Ablation::kNone, Ablation::kSwapFirst, Ablation::kSwapRandom}) {
      auto report = run(corpus, config_with(Setting::kMultiAuthor, ab), gw);
      std::vector<std::string> seq;
      for (const auto& art : report.instances) seq.push_back(art.profile_fingerprint);
      prints.insert(seq);
    }
    CHECK(prints.size() == 3);
  }

  TEST_CASE("LaMP-3 pair with scripted ratings gives the hand-computed errors") {
    auto corpus = fixture("lamp3_pair");
    auto gw = mock_gateway({{"Pairing fixture alpha", "1"}, {"Pairing fixture beta", "3"}});
    auto report = run(corpus, config_with(Setting::kSingleAuthor), gw);
    REQUIRE(report.errors == 0);
    const auto summary = report.metrics.summary();
    CHECK(summary.at("mae") == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(summary.at("rmse") == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK(report.instances[0].prediction == "1");
    CHECK(report.instances[1].prediction == "3");
  }

  TEST_CASE("repeated runs are byte-identical") {
    for (const char* name : {"lamp3", "lamp5", "psw4"}) {
      CAPTURE(name);
      auto corpus = fixture(name);
      auto gw1 = mock_gateway();
      auto gw2 = mock_gateway();
      auto a = run(corpus, config_with(Setting::kMultiAuthor), gw1);
      auto b = run(corpus, config_with(Setting::kMultiAuthor), gw2);
      CHECK(a.to_json().dump() == b.to_json().dump());
    }
  }

  TEST_CASE("empty reference table leaves the report unchanged") {
    auto corpus = fixture("lamp3");
    auto gw = mock_gateway();
    auto plain = run(corpus, config_with(Setting::kSingleAuthor), gw);
    RunOptions options;
    options.reference = ReferenceTable{};
    auto with_empty = run(corpus, config_with(Setting::kSingleAuthor), gw, options);
    CHECK(with_empty.comparison.empty());
    CHECK(plain.to_json().dump() == with_empty.to_json().dump());
    CHECK(compare(TaskKind::kLamp3, Setting::kSingleAuthor, Ablation::kNone, plain.metrics.summary(), {}).empty());
  }

  TEST_CASE("profile_removed prompts carry no profile") {
    auto corpus = fixture("psw1");
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kMultiAuthor, Ablation::kProfileRemoved), gw);
    for (const auto& art : report.instances) {
      REQUIRE(art.ok());
      CHECK(art.prompt.text.find("User Profile") == std::string::npos);
      CHECK(art.composed_profile.empty());
      CHECK(art.prompt.text.find("User History") != std::string::npos);
    }
  }

  TEST_CASE("profile_random draws distinct outside donors") {
    auto corpus = fixture("psw1");
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kMultiAuthor, Ablation::kProfileRandom), gw);
    for (const auto& art : report.instances) {
      REQUIRE(art.ok());
      std::set<std::string> donors;
      for (const auto& [author, source] : art.profile_sources) {
        CHECK(source != author);
        CHECK(std::find(art.author_order.begin(), art.author_order.end(), source) == art.author_order.end());
        donors.insert(source);
      }
      CHECK(donors.size() == art.profile_sources.size());
    }
  }

  TEST_CASE("judged tasks record the four rubric scores") {
    auto corpus = fixture("psw2");
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kMultiAuthor), gw);
    const auto summary = report.metrics.summary();
    for (const char* m : {"consistency", "fluency", "relevance", "novelty", "rouge1", "rougeL"}) {
      CAPTURE(m);
      CHECK(summary.contains(m));
    }
    CHECK(report.instances[0].judge_request_keys.size() == 1);
  }

  TEST_CASE("classification tasks report accuracy and macro f1") {
    auto corpus = fixture("lamp2");
    auto gw = mock_gateway();
    auto report = run(corpus, config_with(Setting::kSingleAuthor), gw);
    const auto summary = report.metrics.summary();
    CHECK(summary.contains("accuracy"));
    CHECK(summary.contains("f1_macro"));
  }

  TEST_CASE("invalid combinations are contract violations") {
    auto corpus = fixture("psw1");
    auto gw = mock_gateway();
    CHECK_THROWS_AS(run(corpus, config_with(Setting::kSingleAuthor, Ablation::kSwapFirst), gw), ContractViolation);
  }

  TEST_CASE("provider failures mark the run failed") {
    auto corpus = fixture("lamp5");
    llm::GatewayOptions options;
    options.base_delay = std::chrono::milliseconds(1);
    llm::Gateway gw(std::make_shared<FailingBackend>(), options);
    auto report = run(corpus, config_with(Setting::kSingleAuthor), gw);
    CHECK(report.failed);
    CHECK(report.errors == corpus.instances.size());
    CHECK(report.instances[0].stage == "profile");
  }

  TEST_CASE("ablate produces the five variants") {
    auto corpus = fixture("psw1");
    auto gw = mock_gateway();
    auto reports = ablate(corpus, config_with(Setting::kSingleAuthor), gw);
    REQUIRE(reports.size() == 5);
    const auto order = all_ablations();
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(reports[i].config.ablation == order[i]);
      CHECK(reports[i].config.setting == Setting::kMultiAuthor);
    }
  }

  TEST_CASE("reports write, reload and compare") {
    testing::TempDir dir;
    auto corpus = fixture("psw4");
    auto gw = mock_gateway();
    RunOptions options;
    options.reference = load_reference((testing::source_dir() / "data/reference/published_results.json").string());
    auto report = run(corpus, config_with(Setting::kMultiAuthor), gw, options);
    REQUIRE_FALSE(report.comparison.empty());
    const auto row = std::find_if(report.comparison.begin(), report.comparison.end(),
                                  [](const ComparisonRow& r) { return r.metric == "rouge1"; });
    REQUIRE(row != report.comparison.end());
    CHECK(row->reference == doctest::Approx(0.505));
    REQUIRE(row->ours.has_value());
    CHECK(*row->delta == doctest::Approx(*row->ours - 0.505));

    const auto target = default_report_dir(dir.str(), report);
    CHECK(target.find("psw4/multi_author/none") != std::string::npos);
    const auto path = write_report(report, target);
    for (const char* f : {"report.json", "report.txt", "metrics.csv", "run_meta.json"})
      CHECK(std::filesystem::exists(std::filesystem::path(target) / f));
    auto back = report_from_json(Json::parse(testing::read_file(path)));
    CHECK(back.to_json().dump() == report.to_json().dump());
    CHECK(default_report_dir(dir.str(), report) != target);
  }

  TEST_CASE("reference table lookups") {
    auto ref = load_reference((testing::source_dir() / "data/reference/published_results.json").string());
    auto rows = compare(TaskKind::kLamp3, Setting::kSingleAuthor, Ablation::kNone, {}, ref);
    auto find = [&](const std::string& method, const std::string& metric) {
      return std::find_if(rows.begin(), rows.end(), [&](const ComparisonRow& r) {
        return r.method == method && r.metric == metric;
      });
    };
    REQUIRE(find("ours", "mae") != rows.end());
    CHECK(find("ours", "mae")->reference == doctest::Approx(0.274));
    CHECK(find("ours", "rmse")->reference == doctest::Approx(0.559));
    CHECK_FALSE(find("ours", "mae")->ours.has_value());
    CHECK(render_comparison(rows).find("0.274") != std::string::npos);
    CHECK(reference_rows(ref).size() > reference_rows(ref, TaskKind::kPsw4).size());
  }

  TEST_CASE("gist_corpus profiles each user once and uses the store") {
    testing::TempDir dir;
    auto corpus = fixture("psw4");
    auto config = config_with(Setting::kMultiAuthor);
    config.cache_dir = dir.str();
    auto gw = mock_gateway();
    auto first = gist_corpus(corpus, config, gw);
    CHECK(first.size() == 8);
    const auto calls = gw.provider_calls();
    auto gw2 = mock_gateway();
    auto second = gist_corpus(corpus, config, gw2);
    CHECK(gw2.provider_calls() == 0);
    REQUIRE(second.size() == first.size());
    CHECK(second[0].profile == first[0].profile);
    auto refreshed = gist_corpus(corpus, config, gw2, true);
    CHECK(gw2.provider_calls() == calls);
  }
}
