#include "doctest.h"

#include "gistkit/hash.hpp"
#include "gistkit/random.hpp"
#include "gistkit/text.hpp"

#include <algorithm>
#include <numeric>

using namespace gistkit;

TEST_SUITE("text") {
  TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
    CHECK(tokenize("The Cat, sat-on the_MAT!") ==
          std::vector<std::string>{"the", "cat", "sat", "on", "the", "mat"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("  ,;  ").empty());
    CHECK(tokenize("caf\xC3\xA9 x2") == std::vector<std::string>{"caf\xC3\xA9", "x2"});
  }

  TEST_CASE("porter stemmer on reference vocabulary") {
    // Pairs from the stemmer's published test vocabulary.
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"caresses", "caress"}, {"ponies", "poni"},       {"cats", "cat"},
        {"feed", "feed"},       {"agreed", "agre"},       {"plastered", "plaster"},
        {"motoring", "motor"},  {"sing", "sing"},         {"conflated", "conflat"},
        {"hopping", "hop"},     {"filing", "file"},       {"happy", "happi"},
        {"relational", "relat"}, {"generalization", "gener"}, {"running", "run"},
        {"adjustable", "adjust"}, {"is", "is"},
    };
    for (const auto& [word, stem] : cases) {
      CAPTURE(word);
      CHECK(porter_stem(word) == stem);
    }
    CHECK(tokenize("Running cats", true) == std::vector<std::string>{"run", "cat"});
  }

  TEST_CASE("utf8 length counts code points") {
    CHECK(utf8_length("abc") == 3);
    CHECK(utf8_length("\xE2\x89\xA5" "2") == 2);
    CHECK(utf8_length("") == 0);
  }

  TEST_CASE("helpers") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(bracket_list({"a", "b"}) == "[a, b]");
    CHECK(bracket_list({}) == "[]");
    CHECK(join({"x", "y", "z"}, "/") == "x/y/z");
    CHECK(split_lines("a\nb\r\nc") == std::vector<std::string>{"a", "b", "c"});
  }

  TEST_CASE("sha256 known vector") {
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("sequence fingerprint is order and boundary sensitive") {
    CHECK(sequence_fingerprint({"a", "b"}) != sequence_fingerprint({"b", "a"}));
    CHECK(sequence_fingerprint({"ab", "c"}) != sequence_fingerprint({"a", "bc"}));
    CHECK(sequence_fingerprint({"a", "b"}) == sequence_fingerprint({"a", "b"}));
  }

  TEST_CASE("seeded rng is reproducible and unbiased in range") {
    SeededRng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    SeededRng r(1);
    std::vector<int> counts(3, 0);
    for (int i = 0; i < 3000; ++i) counts[r.below(3)]++;
    for (int c : counts) CHECK(c > 800);

    std::vector<int> items(10);
    std::iota(items.begin(), items.end(), 0);
    auto shuffled = items;
    SeededRng s(9);
    s.shuffle(shuffled);
    auto sorted = shuffled;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == items);
    CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
    CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
  }
}
