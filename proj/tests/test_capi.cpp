#include "doctest.h"

#include "gistkit/gistkit.h"
#include "json.hpp"
#include "support.hpp"

#include <string>

namespace {

/// Takes ownership of a library-allocated string.
std::string take(char* text) {
  std::string out = text != nullptr ? text : "";
  gk_string_free(text);
  return out;
}

std::string fixture_path(const std::string& name) { return testing::fixture(name).string(); }

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(gk_version()) == "0.1.0");
  CHECK(std::string(gk_status_name(GK_OK)) == "ok");
  CHECK(std::string(gk_status_name(GK_LOAD)) != "");
}

TEST_CASE("full run through the C interface") {
  testing::TempDir dir;
  gk_gateway* gw = nullptr;
  const std::string options = R"({"cache_dir": ")" + dir.str() + R"(/cache"})";
  REQUIRE(gk_gateway_create("mock", options.c_str(), &gw) == GK_OK);

  gk_corpus* corpus = nullptr;
  REQUIRE(gk_corpus_load(fixture_path("psw4.json").c_str(), "psw4", &corpus) == GK_OK);
  char* manifest = nullptr;
  REQUIRE(gk_corpus_manifest(corpus, &manifest) == GK_OK);
  CHECK(nlohmann::json::parse(take(manifest))["instance_count"] == 5);

  gk_reference* ref = nullptr;
  const auto ref_path = (testing::source_dir() / "data/reference/published_results.json").string();
  REQUIRE(gk_reference_load(ref_path.c_str(), &ref) == GK_OK);

  gk_report* report = nullptr;
  REQUIRE(gk_run(corpus, gw, R"({"setting": "multi_author", "seed": 7})", ref, &report) == GK_OK);
  CHECK(gk_report_failed(report) == 0);
  uint64_t calls = 0;
  REQUIRE(gk_gateway_provider_calls(gw, &calls) == GK_OK);
  CHECK(calls > 0);

  char* json = nullptr;
  REQUIRE(gk_report_json(report, &json) == GK_OK);
  const std::string report_json = take(json);
  CHECK(nlohmann::json::parse(report_json)["schema"] == "gistkit.report/1");

  char* text = nullptr;
  REQUIRE(gk_compare(report, ref, nullptr, &text, nullptr) == GK_OK);
  CHECK(take(text).find("0.505") != std::string::npos);

  char* out_dir = nullptr;
  REQUIRE(gk_report_default_dir(report, dir.str().c_str(), &out_dir) == GK_OK);
  char* out_path = nullptr;
  REQUIRE(gk_report_write(report, take(out_dir).c_str(), &out_path) == GK_OK);
  gk_report* loaded = nullptr;
  REQUIRE(gk_report_load(take(out_path).c_str(), &loaded) == GK_OK);
  char* loaded_json = nullptr;
  REQUIRE(gk_report_json(loaded, &loaded_json) == GK_OK);
  CHECK(take(loaded_json) == report_json);

  char* csv = nullptr;
  REQUIRE(gk_report_csv(report, &csv) == GK_OK);
  CHECK(take(csv).find("aggregate") != std::string::npos);

  gk_report_free(loaded);
  gk_report_free(report);
  gk_reference_free(ref);
  gk_corpus_free(corpus);
  gk_gateway_free(gw);
}

TEST_CASE("errors map to status codes with a message") {
  gk_corpus* corpus = nullptr;
  CHECK(gk_corpus_load("/nonexistent/file.json", nullptr, &corpus) != GK_OK);
  CHECK(std::string(gk_last_error()).size() > 0);
  CHECK(gk_corpus_load(fixture_path("psw4.json").c_str(), "lamp5", &corpus) == GK_LOAD);
  CHECK(gk_corpus_load(nullptr, nullptr, &corpus) == GK_INVALID_ARGUMENT);

  gk_gateway* gw = nullptr;
  CHECK(gk_gateway_create("carrier-pigeon", nullptr, &gw) == GK_CONTRACT_VIOLATION);

  char* problems = nullptr;
  CHECK(gk_validate_config("psw1", R"({"setting": "single_author", "ablation": "swap_first"})", &problems) ==
        GK_CONTRACT_VIOLATION);
  CHECK(take(problems).find("multi_author") != std::string::npos);
  CHECK(gk_validate_config("psw1", R"({"setting": "multi_author"})", nullptr) == GK_OK);
}

TEST_CASE("stats, validation, prompts and judge parsing") {
  gk_corpus* corpus = nullptr;
  REQUIRE(gk_corpus_load(fixture_path("psw4.json").c_str(), nullptr, &corpus) == GK_OK);
  char* csv = nullptr;
  REQUIRE(gk_corpus_stats_csv(corpus, "PSW-4", &csv) == GK_OK);
  CHECK(take(csv).find("Avg. Authors / Paper") != std::string::npos);
  gk_corpus_free(corpus);

  char* problems = nullptr;
  CHECK(gk_corpus_validate_file(fixture_path("psw4.json").c_str(), &problems) == GK_OK);
  take(problems);

  char* rendered = nullptr;
  const auto binding = testing::read_file(testing::source_dir() / "prompts/golden/lamp1.binding.json");
  REQUIRE(gk_render_prompt("lamp1", binding.c_str(), &rendered) == GK_OK);
  CHECK(take(rendered) == testing::read_file(testing::source_dir() / "prompts/golden/lamp1.txt"));

  char* scores = nullptr;
  REQUIRE(gk_parse_geval(R"(ok {"consistency":7,"fluency":2,"relevance":4,"novelty":2})", &scores) == GK_OK);
  const auto s = nlohmann::json::parse(take(scores));
  CHECK(s["consistency"] == 5);
  CHECK(s["warnings"].size() == 1);
  CHECK(gk_parse_geval("no json", &scores) == GK_JUDGE_PARSE);
}
