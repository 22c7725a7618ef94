#include <doctest.h>

#include <cmath>

#include "qb/error.h"
#include "qb/nqs.h"
#include "support.h"

using namespace qb;
using namespace qb::nqs;

namespace {

linker::AnalyzedQuestion q(const std::string& id, const std::string& text) {
  static const linker::MentionDictionary kEmpty;
  return linker::analyze(id, text, kEmpty);
}

NQSModel toy(const std::vector<const linker::AnalyzedQuestion*>& qs, std::vector<std::string> answers,
             std::size_t dim, bool identity = true) {
  NQSConfig cfg;
  cfg.dim = dim;
  cfg.identity_projection = identity;
  return NQSModel::create(qs, corpus::AnswerCatalog::from_titles(std::move(answers)), cfg, 1);
}

}  // namespace

TEST_CASE("question encoding") {
  auto a = q("a", "alpha beta");
  auto m = toy({&a}, {"A1", "A2"}, 2);
  int alpha = m.word_id("alpha"), beta = m.word_id("beta");
  REQUIRE(alpha >= 0);
  REQUIRE(beta >= 0);
  auto& w = m.word_table().value;
  w(static_cast<std::size_t>(alpha), 0) = 1.0f;
  w(static_cast<std::size_t>(alpha), 1) = 2.0f;
  w(static_cast<std::size_t>(beta), 0) = 3.0f;
  w(static_cast<std::size_t>(beta), 1) = 4.0f;

  auto one = m.encode({{"alpha"}, {}});
  CHECK(one.combined == std::vector<double>{1.0, 2.0});
  CHECK(one.entity_part == std::vector<double>{0.0, 0.0});

  auto both = m.encode({{"alpha", "beta"}, {}});
  CHECK(both.combined[0] == doctest::Approx(2.0));
  CHECK(both.combined[1] == doctest::Approx(3.0));

  auto& p = m.word_projection().value;
  p(0, 0) = 1.0f;
  p(0, 1) = 1.0f;
  p(1, 0) = 0.0f;
  p(1, 1) = 2.0f;
  auto projected = m.encode({{"alpha", "beta"}, {}});
  CHECK(projected.combined[0] == doctest::Approx(5.0));
  CHECK(projected.combined[1] == doctest::Approx(6.0));
  CHECK(projected.word_part == projected.combined);
}

TEST_CASE("answer distribution closed forms") {
  auto a = q("a", "alpha");
  auto m = toy({&a}, {"A1", "A2"}, 2);
  auto& ans = m.answer_table().value;
  ans(0, 0) = 1.0f;
  ans(0, 1) = 0.0f;
  ans(1, 0) = 0.0f;
  ans(1, 1) = 1.0f;
  auto& w = m.word_table().value;
  w(static_cast<std::size_t>(m.word_id("alpha")), 0) = static_cast<float>(std::log(3.0));
  w(static_cast<std::size_t>(m.word_id("alpha")), 1) = 0.0f;
  auto p = m.predict({{"alpha"}, {}});
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-6));
  auto [prob, logit] = m.scores({{"alpha"}, {}}, "A1");
  CHECK(prob == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(logit == doctest::Approx(std::log(3.0)).epsilon(1e-6));
  CHECK_THROWS_AS(m.scores({{"alpha"}, {}}, "Missing"), qb::Error);

  auto zero = m.predict({{"unseen"}, {}});
  CHECK(zero[0] == doctest::Approx(0.5));

  ans(1, 0) = 1.0f;
  ans(1, 1) = 0.0f;
  auto same = m.predict({{"alpha"}, {}});
  CHECK(same[0] == doctest::Approx(0.5));
}

TEST_CASE("training separable toy keeps answers frozen") {
  std::vector<linker::AnalyzedQuestion> qs;
  const std::vector<std::vector<std::string>> vocab = {
      {"apple", "pear", "plum", "fig"}, {"river", "lake", "sea", "pond"}, {"iron", "gold", "lead", "tin"}};
  std::mt19937_64 rng(3);
  for (std::size_t a = 0; a < 3; ++a)
    for (int i = 0; i < 10; ++i) {
      std::string text;
      for (int k = 0; k < 6; ++k) text += vocab[a][rng() % 4] + " ";
      qs.push_back(q("q" + std::to_string(a) + "_" + std::to_string(i), text));
    }
  std::vector<Example> train;
  for (std::size_t i = 0; i < qs.size(); ++i) train.push_back({&qs[i], static_cast<int>(i / 10)});
  auto catalog = corpus::AnswerCatalog::from_titles({"A", "B", "C"});
  NQSConfig cfg;
  cfg.dim = 16;
  cfg.learning_rate = 0.01;
  cfg.dropout = 0.0;
  cfg.random_truncation = false;

  std::vector<const linker::AnalyzedQuestion*> ptrs;
  for (const auto& x : qs) ptrs.push_back(&x);
  auto before = nnet::checksum(NQSModel::create(ptrs, catalog, cfg, 5).answer_table().value);
  TrainReport report;
  auto m = train_nqs(train, {}, catalog, cfg, 5, nullptr, &report);
  CHECK(report.epochs <= 30);
  CHECK(accuracy(m, train) == 1.0);
  CHECK(nnet::checksum(m.answer_table().value) == before);

  auto again = train_nqs(train, {}, catalog, cfg, 5);
  CHECK(again.word_table().value == m.word_table().value);
}

TEST_CASE("single answer catalog predicts one") {
  auto a = q("a", "alpha beta");
  auto m = toy({&a}, {"Only"}, 4, false);
  auto p = m.predict({{"alpha"}, {}});
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0));
}

TEST_CASE("nqs gradients match finite differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = check_gradients(seed);
    CAPTURE(r.worst);
    CHECK(r.max_relative_error < 1e-3);
  }
}

TEST_CASE("nqs persistence") {
  qb::testing::TempDir dir;
  auto a = q("a", "alpha beta gamma");
  auto m = toy({&a}, {"A1", "A2", "A3"}, 4, false);
  m.set_trained_on({"a"});
  m.save(dir.path().string(), "nqs");
  auto back = NQSModel::load(dir.path().string(), "nqs");
  CHECK(back.predict({{"alpha", "gamma"}, {}}) == m.predict({{"alpha", "gamma"}, {}}));
  CHECK(back.trained_on() == m.trained_on());
}
