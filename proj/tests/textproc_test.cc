#include <doctest.h>

#include <algorithm>

#include "qb/textproc.h"
#include "support.h"

using namespace qb::textproc;

TEST_CASE("porter2 reference pairs") {
  const std::vector<std::pair<const char*, const char*>> pairs = {
      {"running", "run"},       {"generously", "generous"}, {"cat", "cat"},         {"castle", "castl"},
      {"consolidated", "consolid"}, {"hopping", "hop"},     {"hoping", "hope"},     {"skies", "sky"},
      {"ponies", "poni"},       {"caresses", "caress"},     {"cry", "cri"},         {"generate", "generat"},
      {"knightly", "knight"},   {"agreed", "agre"},         {"happily", "happili"}, {"news", "news"},
  };
  for (const auto& [in, out] : pairs) {
    CAPTURE(in);
    CHECK(stem(in) == out);
  }
}

TEST_CASE("tokenize counts tokens and sentences") {
  auto empty = tokenize("");
  CHECK(empty.tokens.empty());
  CHECK(empty.sentence_count == 0);

  auto tt = tokenize("A b. C d.");
  CHECK(tt.tokens.size() == 4);
  CHECK(tt.sentence_count == 2);
  CHECK(tt.tokens[2].sentence_index == 1);
  CHECK(tt.tokens[2].surface == "C");
  CHECK(tt.tokens[2].lower == "c");
}

TEST_CASE("the example question has four sentences") {
  auto tt = tokenize(qb::testing::kTable1Question);
  CHECK(tt.sentence_count == 4);
  CHECK(tt.sentences.size() == 4);
}

TEST_CASE("abbreviations do not end sentences") {
  auto tt = tokenize("He met Mr. Smith in St. Louis. Then he left.");
  CHECK(tt.sentence_count == 2);
}

TEST_CASE("ir_terms drops stopwords and stems") {
  CHECK(ir_terms("the castle") == std::vector<std::string>{"castl"});
  CHECK(ir_terms("the of and").empty());
  CHECK(ir_terms("").empty());
}

TEST_CASE("bigrams of adjacent terms") {
  CHECK(bigrams({"a", "b", "c"}) == std::vector<std::string>{"a_b", "b_c"});
  CHECK(bigrams({"a"}).empty());
  CHECK(bigrams(ir_terms("rotten food")) == std::vector<std::string>{"rotten_food"});
}

TEST_CASE("proper nouns from mid-sentence capitals") {
  auto tt = tokenize("He met Gregor Samsa.");
  CHECK(extract_proper_nouns(tt) == std::vector<std::string>{"gregor", "samsa"});
  CHECK(extract_proper_nouns(tokenize("all lowercase words here")).empty());
}

TEST_CASE("proper nouns are a subset of nouns") {
  for (const char* text : {qb::testing::kTable1Question, "He met Gregor Samsa.", "Paris is the capital of France.",
                           "nothing capitalized at all"}) {
    auto tt = tokenize(text);
    auto nouns = extract_nouns(tt);
    for (const auto& p : extract_proper_nouns(tt)) {
      CAPTURE(p);
      CHECK(std::find(nouns.begin(), nouns.end(), p) != nouns.end());
    }
  }
}

TEST_CASE("casefold handles latin-1") {
  CHECK(casefold("ÉCOLE Abc") == "école abc");
}
