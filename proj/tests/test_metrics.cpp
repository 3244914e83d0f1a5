#include "doctest.h"

#include "gistkit/errors.hpp"
#include "gistkit/metrics.hpp"
#include "gistkit/text.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace gistkit;
using namespace gistkit::metrics;

TEST_SUITE("metrics") {
  TEST_CASE("rouge1 hand oracles") {
    CHECK(rouge1("the cat sat", "the cat sat") == 1.0);
    CHECK(rouge1("alpha beta", "gamma delta") == 0.0);
    CHECK(rouge1("the cat sat", "the cat ran") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // Clipped counts: "the" twice on both sides, overlap 5 of 6.
    CHECK(rouge1("the cat sat on the mat", "the cat is on the mat") ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(rouge1("", "") == 1.0);
    CHECK(rouge1("", "x") == 0.0);
    CHECK(rouge1("x", "...") == 0.0);
  }

  TEST_CASE("rougeL hand oracles") {
    CHECK(rougeL("same words here", "same words here") == 1.0);
    // LCS 4, P = 4/5, R = 4/4.
    CHECK(rougeL("the cat sat on mat", "the cat on mat") ==
          doctest::Approx(2 * 0.8 / 1.8).epsilon(1e-12));
    CHECK(rougeL("a b c", "c b a") == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rougeL("", "") == 1.0);
    CHECK(rougeL("a", "") == 0.0);
  }

  TEST_CASE("stemming option") {
    CHECK(rouge1("running cats", "run cat") == 0.0);
    CHECK(rouge1("running cats", "run cat", {true}) == 1.0);
  }

  TEST_CASE("lcs dynamic program equals brute force") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
      auto a = oracle::random_tokens(rng, 10, 4);
      auto b = oracle::random_tokens(rng, 10, 4);
      CAPTURE(i);
      REQUIRE(lcs_length(a, b) == oracle::lcs_brute_force(a, b));
    }
  }

  TEST_CASE("accuracy and macro f1") {
    CHECK(accuracy({"a", "b"}, {"a", "b"}) == 1.0);
    CHECK(f1_macro({"a", "b"}, {"a", "b"}) == 1.0);
    CHECK(accuracy({"a", "a", "b"}, {"a", "b", "b"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f1_macro({"a", "a", "b"}, {"a", "b", "b"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // a: P=1/2 R=1 -> 2/3; b: P=1 R=1/3 -> 1/2; c: predicted only -> 0.
    CHECK(f1_macro({"a", "b", "c", "a"}, {"a", "b", "b", "b"}) ==
          doctest::Approx((2.0 / 3.0 + 0.5) / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(accuracy({"a"}, {"a", "b"}), ContractViolation);
    CHECK_THROWS_AS(f1_macro({"a"}, {}), ContractViolation);
  }

  TEST_CASE("mae and rmse") {
    CHECK(mae({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(mae({1, 3}, {2, 5}) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(rmse({1, 3}, {2, 5}) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK(mae({4}, {2}) == 2.0);
    CHECK(rmse({4}, {2}) == 2.0);
    CHECK_THROWS_AS(mae({1}, {1, 2}), ContractViolation);
  }

  TEST_CASE("rating parsing and fallback") {
    CHECK(parse_rating("4") == 4);
    CHECK(parse_rating("I would rate it 5 stars") == 5);
    CHECK(parse_rating("10 out of 10") == std::nullopt);
    CHECK(parse_rating("no idea") == std::nullopt);
    auto fb = rating_or_fallback("no idea", 2);
    CHECK(fb.value == 2);
    CHECK(fb.fallback);
    CHECK(rating_or_fallback("none", std::nullopt).value == 3);
    CHECK_FALSE(rating_or_fallback("3", 1).fallback);
  }

  TEST_CASE("classification reply parsing") {
    const std::vector<std::string> refs = {"Paper A", "Paper B"};
    CHECK(parse_citation_choice("[2]", refs) == "Paper B");
    CHECK(parse_citation_choice("1", refs) == "Paper A");
    CHECK(parse_citation_choice("nothing", refs) == "nothing");
    const std::vector<std::string> cats = {"sci-fi", "science", "comedy"};
    CHECK(parse_category("The answer is Sci-Fi.", cats) == "sci-fi");
    CHECK(parse_category("comedy", cats) == "comedy");
  }

  TEST_CASE("parse_geval clean json") {
    auto s = parse_geval(R"({"consistency":4,"fluency":2,"relevance":4,"novelty":2})");
    CHECK(s.consistency == 4);
    CHECK(s.fluency == 2);
    CHECK(s.relevance == 4);
    CHECK(s.novelty == 2);
    CHECK(s.warnings.empty());
    CHECK_FALSE(s.clamped());
  }

  TEST_CASE("parse_geval clamps out-of-range scores") {
    auto s = parse_geval(R"({"consistency":7,"fluency":2,"relevance":4,"novelty":0})");
    CHECK(s.consistency == 5);
    CHECK(s.novelty == 1);
    CHECK(s.clamped());
    CHECK(s.warnings.size() == 2);
  }

  TEST_CASE("parse_geval finds json inside prose") {
    const std::string text =
        "The output is on topic {mostly}. Scores: "
        R"({"consistency": 3, "fluency": 3, "relevance": 5, "novelty": 1})"
        " Overall fine.";
    auto s = parse_geval(text);
    CHECK(s.consistency == 3);
    CHECK(s.fluency == 3);
    CHECK(s.relevance == 5);
    CHECK(s.novelty == 1);
    CHECK(s.raw_judge_text == text);
  }

  TEST_CASE("parse_geval missing field raises with raw text") {
    const std::string text = R"(no scores {"consistency": 3})";
    try {
      parse_geval(text);
      FAIL("expected JudgeParseError");
    } catch (const JudgeParseError& e) {
      CHECK(e.raw_text() == text);
    }
    CHECK_THROWS_AS(parse_geval("nothing here"), JudgeParseError);
  }

  TEST_CASE("average_geval") {
    auto a = parse_geval(R"({"consistency":4,"fluency":2,"relevance":4,"novelty":2})");
    auto b = parse_geval(R"({"consistency":2,"fluency":3,"relevance":5,"novelty":1})");
    auto m = average_geval({a, b});
    CHECK(m.consistency == 3);
    CHECK(m.fluency == 2.5);
    CHECK(m.relevance == 4.5);
    CHECK(m.novelty == 1.5);
  }

  TEST_CASE("metric table aggregates and corpus metrics") {
    MetricTable t;
    t.add("i1", "rouge1", 0.5);
    t.add("i2", "rouge1", 1.0);
    t.add("i2", "rougeL", 0.25);
    t.set_corpus_metric("rmse", 2.0);
    CHECK(t.aggregate().at("rouge1") == 0.75);
    CHECK(t.aggregate().at("rougeL") == 0.25);
    CHECK(t.counts().at("rougeL") == 1);
    CHECK(t.summary().at("rmse") == 2.0);
    CHECK(t.value("i1", "rougeL") == std::nullopt);
    const auto csv = t.to_csv();
    CHECK(csv.find("aggregate") != std::string::npos);
    CHECK(csv.find("i1,") != std::string::npos);
  }
}
