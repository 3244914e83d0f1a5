#include "doctest.h"

#include "gistkit/datasets.hpp"
#include "gistkit/errors.hpp"
#include "httplib.h"
#include "support.hpp"

#include <algorithm>
#include <set>
#include <thread>

using namespace gistkit;
using namespace gistkit::datasets;

namespace {

Json corpus_json(const std::string& task, Json instances) {
  return {{"schema_version", 1}, {"name", "t"}, {"task", task}, {"split", "test"}, {"instances", instances}};
}

Json psw_instance(const std::string& id, const std::vector<std::string>& authors) {
  Json as = Json::array();
  Json hs = Json::object();
  for (std::size_t i = 0; i < authors.size(); ++i) {
    as.push_back({{"id", authors[i]}, {"position", i}, {"role", "unspecified"}});
    hs[authors[i]] = Json::array({{{"input", "past title"}, {"output", "past abstract"}, {"meta", Json::object()}}});
  }
  return {{"id", id}, {"task", "psw4"}, {"input", "An abstract."}, {"target", "A title"},
          {"authors", as}, {"histories", hs}};
}

class FakeIndex : public ScholarlyIndex {
 public:
  std::vector<PaperRecord> papers;
  std::map<std::string, std::vector<PaperRecord>> by_author;
  std::set<std::string> failing_authors;

  std::vector<PaperRecord> search(const std::string&, int, int limit) override {
    auto out = papers;
    if (static_cast<int>(out.size()) > limit) out.resize(static_cast<std::size_t>(limit));
    return out;
  }
  std::vector<PaperRecord> author_papers(const std::string& id, int) override {
    if (failing_authors.contains(id)) throw GatewayError(503, "unavailable");
    return by_author[id];
  }
  std::vector<std::string> reference_titles(const std::string&) override { return {"Ref A", "Ref B"}; }
};

PaperRecord paper(const std::string& id, std::vector<AuthorRef> authors, int year = 2020,
                  std::string abstract = "An abstract about things.") {
  PaperRecord p;
  p.paper_id = id;
  p.title = "Title " + id;
  p.abstract = std::move(abstract);
  p.year = year;
  p.authors = std::move(authors);
  p.reference_count = 2;
  return p;
}

FakeIndex sample_index() {
  FakeIndex index;
  index.papers = {paper("p1", {{"A", "Ada"}, {"B", "Bo"}}), paper("p2", {{"C", "Cy"}}),
                  paper("p3", {{"B", "Bo"}, {"D", "Di"}, {"A", "Ada"}}),
                  paper("p4", {{"E", "Ed"}, {"F", "Fi"}}, 1990), paper("p5", {{"E", "Ed"}, {"F", "Fi"}}, 2020, "")};
  for (std::string a : {"A", "B", "C", "D", "E", "F"}) {
    index.by_author[a] = {paper("h-" + a + "1", {{a, a}}), paper("h-" + a + "2", {{a, a}}), paper("p1", {{a, a}})};
  }
  return index;
}

}  // namespace

TEST_SUITE("datasets") {
  TEST_CASE("empty instance array loads as an empty corpus") {
    auto c = corpus_from_json(corpus_json("lamp5", Json::array()));
    CHECK(c.instances.empty());
    CHECK(c.manifest.instance_count == 0);
  }

  TEST_CASE("LaMP-3 fixture with two instances parses integer ratings") {
    auto c = load_corpus(testing::fixture("lamp3_pair.json").string(), TaskKind::kLamp3);
    REQUIRE(c.instances.size() == 2);
    CHECK(std::get<Rating>(c.instances[0].target).value == 2);
    CHECK(std::get<Rating>(c.instances[1].target).value == 5);
    CHECK(c.manifest.task == TaskKind::kLamp3);
  }

  TEST_CASE("one-author PSW paper is a load error citing the author rule") {
    Json j = corpus_json("psw4", Json::array({psw_instance("ok", {"a", "b"}), psw_instance("bad", {"a"})}));
    try {
      corpus_from_json(j);
      FAIL("expected LoadError");
    } catch (const LoadError& e) {
      CHECK(e.instance_index() == 1);
      CHECK(std::string(e.what()).find("2 authors") != std::string::npos);
    }
  }

  TEST_CASE("task mismatch and hash mismatch") {
    Json j = corpus_json("psw4", Json::array({psw_instance("ok", {"a", "b"})}));
    CHECK_THROWS_AS(corpus_from_json(j, TaskKind::kLamp5), LoadError);
    j["content_hash"] = "00";
    CHECK_THROWS_AS(corpus_from_json(j), IntegrityError);
  }

  TEST_CASE("save then load round-trips with a content hash") {
    testing::TempDir dir;
    auto c = corpus_from_json(corpus_json("psw4", Json::array({psw_instance("x", {"a", "b"})})));
    const auto path = (dir.path() / "c.json").string();
    save_corpus(path, c);
    auto back = load_corpus(path);
    CHECK(back.instances == c.instances);
    CHECK(back.manifest.content_hash == content_hash(c.instances));
    CHECK(Json::parse(testing::read_file(path))["content_hash"] == content_hash(c.instances));
  }

  TEST_CASE("validate_corpus_file collects every problem") {
    testing::TempDir dir;
    Json j = corpus_json("psw4", Json::array({psw_instance("a", {"x"}), psw_instance("b", {"y"})}));
    testing::write_file(dir.path() / "bad.json", j.dump());
    CHECK(validate_corpus_file((dir.path() / "bad.json").string()).size() >= 2);
    CHECK(validate_corpus_file(testing::fixture("psw4.json").string()).empty());
    CHECK_FALSE(validate_corpus_file((dir.path() / "missing.json").string()).empty());
  }

  TEST_CASE("stats of two papers with three and four authors") {
    auto c = corpus_from_json(corpus_json(
        "psw4", Json::array({psw_instance("p1", {"a", "b", "c"}), psw_instance("p2", {"a", "b", "d", "e"})})));
    auto s = compute_stats(c);
    CHECK(s.papers == 2);
    CHECK(s.authors == 5);
    CHECK(s.avg_authors_per_paper == 3.5);
    CHECK(s.avg_history_papers_per_author == 1.0);
    CHECK_FALSE(s.avg_research_interests_per_author.has_value());
  }

  TEST_CASE("stats of an empty corpus") {
    CHECK_THROWS_AS(compute_stats(Corpus{}), EmptyCorpus);
  }

  TEST_CASE("bundled PSW fixture reproduces its precomputed stats") {
    auto c = load_corpus(testing::fixture("psw4.json").string());
    auto want = stats_from_json(Json::parse(testing::read_file(testing::fixture("psw4.stats.json"))));
    CHECK(compute_stats(c) == want);
    const auto csv = stats_csv(compute_stats(c), "PSW-4");
    CHECK(csv.rfind("Statistic,PSW-4\n", 0) == 0);
    CHECK(csv.find("Avg. Authors / Paper,3") != std::string::npos);
    CHECK(csv.find("Avg. History Papers / Author,6") != std::string::npos);
    const auto& labels = stats_row_labels();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(labels.size() + 1));
  }

  TEST_CASE("split partitions deterministically") {
    auto all = split_indices(10, {1, 0, 0}, 3);
    CHECK(all.train.size() == 10);
    CHECK(all.valid.empty());
    CHECK(all.test.empty());

    auto a = split_indices(37, {0.8, 0.1, 0.1}, 5);
    auto b = split_indices(37, {0.8, 0.1, 0.1}, 5);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == 29);
    CHECK(a.valid.size() == 4);
    CHECK(a.test.size() == 4);
    std::set<std::size_t> seen(a.train.begin(), a.train.end());
    seen.insert(a.valid.begin(), a.valid.end());
    seen.insert(a.test.begin(), a.test.end());
    CHECK(seen.size() == 37);
    CHECK_THROWS_AS(split_indices(5, {0.5, 0.1, 0.1}, 1), ContractViolation);
    CHECK_THROWS_AS(split_indices(5, {1.2, -0.2, 0}, 1), ContractViolation);
  }

  TEST_CASE("build_psw filters, anonymizes and keeps the map private") {
    testing::TempDir dir;
    auto index = sample_index();
    PswBuildOptions options;
    options.out_dir = dir.str();
    options.ratios = {1, 0, 0};
    options.min_year = 2001;
    auto result = build_psw(index, options);
    CHECK(result.papers == 2);
    auto skipped = [&](const std::string& prefix) {
      return std::any_of(result.skipped.begin(), result.skipped.end(),
                         [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
    };
    CHECK(skipped("p2:"));
    CHECK(skipped("p4:"));
    CHECK(skipped("p5:"));

    auto train = load_corpus((dir.path() / "psw4_train.json").string(), TaskKind::kPsw4);
    REQUIRE(train.instances.size() == 2);
    // Ada and Bo appear on both papers under the same opaque ids.
    const auto& p1 = train.instances[0];
    const auto& p3 = train.instances[1];
    CHECK(p1.authors[0].user_id == p3.authors[2].user_id);
    CHECK(p1.authors[1].user_id == p3.authors[0].user_id);
    // The target paper is left out of each history.
    for (const auto& [_, h] : p1.histories)
      for (const auto& e : h.entries) CHECK(e.input != "Title p1");

    const auto files_text = testing::read_file(dir.path() / "psw4_train.json");
    CHECK(files_text.find("Ada") == std::string::npos);
    CHECK(files_text.find("\"A\"") == std::string::npos);
    auto map = Json::parse(testing::read_file(result.private_map_path));
    CHECK(map.size() == 3);  // A, B and D; C's paper was filtered out
    CHECK(map["A"] == p1.authors[0].user_id);
  }

  TEST_CASE("build_psw records author fetch failures") {
    testing::TempDir dir;
    auto index = sample_index();
    index.failing_authors = {"D"};
    PswBuildOptions options;
    options.out_dir = dir.str();
    options.ratios = {1, 0, 0};
    auto result = build_psw(index, options);
    CHECK(result.papers == 1);
    CHECK(result.failures.size() == 1);
  }

  TEST_CASE("Semantic Scholar client against recorded responses") {
    const Json search = {
        {"total", 3},
        {"data",
         {{{"paperId", "P1"}, {"title", "Collaborative drafting"}, {"abstract", "We study drafting."},
           {"year", 2022}, {"referenceCount", 1},
           {"authors", {{{"authorId", "11"}, {"name", "N1"}}, {{"authorId", "22"}, {"name", "N2"}}}}},
          {{"paperId", "P2"}, {"title", "Solo work"}, {"abstract", "Alone."}, {"year", 2022},
           {"authors", {{{"authorId", "11"}, {"name", "N1"}}}}},
          {{"paperId", "P3"}, {"title", "Retrieval for teams"}, {"abstract", "Teams retrieve."},
           {"year", 2023}, {"referenceCount", 0},
           {"authors", {{{"authorId", "22"}, {"name", "N2"}}, {{"authorId", "33"}, {"name", "N3"}}}}}}}};
    auto history = [](const std::string& id) {
      return Json{{"data",
                   {{{"paperId", "H" + id}, {"title", "Past work of " + id}, {"abstract", "Old abstract."}, {"year", 2019}},
                    {{"paperId", "P1"}, {"title", "Collaborative drafting"}, {"abstract", "We study drafting."}}}}};
    };

    httplib::Server server;
    std::atomic<int> search_calls{0};
    server.Get("/graph/v1/paper/search", [&](const httplib::Request& req, httplib::Response& res) {
      if (search_calls++ == 0) {
        res.status = 503;  // first attempt fails, the client retries
        return;
      }
      CHECK(req.get_header_value("x-api-key") == "k");
      res.set_content(search.dump(), "application/json");
    });
    server.Get(R"(/graph/v1/author/(\d+)/papers)", [&](const httplib::Request& req, httplib::Response& res) {
      res.set_content(history(req.matches[1]).dump(), "application/json");
    });
    server.Get(R"(/graph/v1/paper/(\w+)/references)", [&](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"data":[{"citedPaper":{"title":"Cited work"}}]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    SemanticScholarClient::Options options;
    options.base_url = "http://127.0.0.1:" + std::to_string(port) + "/graph/v1";
    options.api_key = "k";
    options.min_interval = std::chrono::milliseconds(0);
    options.base_delay = std::chrono::milliseconds(1);

    auto build_once = [&](const std::string& out) {
      SemanticScholarClient client(options);
      PswBuildOptions build;
      build.out_dir = out;
      build.max_papers = 3;
      build.seed = 4;
      build.ratios = {1, 0, 0};
      return build_psw(client, build);
    };
    testing::TempDir a, b;
    auto ra = build_once(a.str());
    auto rb = build_once(b.str());
    server.stop();
    thread.join();

    CHECK(ra.papers == 2);
    REQUIRE(ra.files.size() == rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
      const auto name = std::filesystem::path(ra.files[i]).filename();
      CHECK(testing::read_file(a.path() / name) == testing::read_file(b.path() / name));
    }
    auto psw1 = load_corpus((a.path() / "psw1_train.json").string());
    REQUIRE(psw1.instances.size() == 1);
    CHECK(psw1.instances[0].input == "Cited work");
  }
}
