#include <doctest.h>

#include "qb/ntp.h"
#include "support.h"

using namespace qb;
using namespace qb::ntp;

namespace {

linker::AnalyzedQuestion q(const std::string& id, const std::string& text) {
  static const linker::MentionDictionary kEmpty;
  return linker::analyze(id, text, kEmpty);
}

NTPModel small(const linker::AnalyzedQuestion& a, std::vector<std::string> types, Mode mode, std::size_t d_word,
               std::size_t d_conv, std::vector<std::size_t> windows) {
  NTPConfig cfg;
  cfg.d_word = d_word;
  cfg.d_conv = d_conv;
  cfg.windows = std::move(windows);
  return NTPModel::create({&a}, std::move(types), mode, cfg, 2);
}

void set_word(NTPModel& m, const std::string& w, float v) {
  m.word_table().value(static_cast<std::size_t>(m.word_ids({w}).at(0)), 0) = v;
}

}  // namespace

TEST_CASE("wide convolution covers n + h - 1 windows") {
  auto one = q("1", "solo");
  auto m = small(one, {"x", "y"}, Mode::kCoarse, 1, 1, {2});
  set_word(m, "solo", 2.0f);
  m.conv_bias(0).value(0, 0) = 0.0f;
  m.conv_weight(0).value(0, 0) = 0.0f;
  m.conv_weight(0).value(0, 1) = 1.0f;
  CHECK(m.conv_features(m.word_ids({"solo"})).argmax[0][0] == 0);
  m.conv_weight(0).value(0, 0) = 1.0f;
  m.conv_weight(0).value(0, 1) = 0.0f;
  CHECK(m.conv_features(m.word_ids({"solo"})).argmax[0][0] == 1);

  auto three = q("3", "aa bb cc");
  auto n = small(three, {"x", "y"}, Mode::kCoarse, 1, 1, {2});
  set_word(n, "aa", 1.0f);
  set_word(n, "bb", 2.0f);
  set_word(n, "cc", 3.0f);
  n.conv_weight(0).value(0, 0) = 1.0f;
  n.conv_weight(0).value(0, 1) = -1.0f;
  n.conv_bias(0).value(0, 0) = 0.5f;
  // windows: [pad aa] = -0.5, [aa bb] = -0.5, [bb cc] = -0.5, [cc pad] = 3.5
  auto t = n.conv_features(n.word_ids({"aa", "bb", "cc"}));
  CHECK(t.argmax[0][0] == 3);
  CHECK(t.z[0] == doctest::Approx(3.5));

  n.conv_bias(0).value(0, 0) = -10.0f;
  CHECK(n.conv_features(n.word_ids({"aa", "bb", "cc"})).z[0] == 0.0);
}

TEST_CASE("zero weights give zero features and flat heads") {
  auto a = q("a", "some words here");
  auto coarse = small(a, type_names_for(Mode::kCoarse), Mode::kCoarse, 3, 4, {2, 3});
  for (auto* p : coarse.parameters())
    if (p->name != "word_table") p->value.fill(0.0f);
  auto trace = coarse.conv_features(coarse.word_ids({"some", "words"}));
  for (double z : trace.z) CHECK(z == 0.0);
  auto pc = coarse.predict_types({"some", "words"});
  REQUIRE(pc.probabilities.size() == 8);
  for (double p : pc.probabilities) CHECK(p == doctest::Approx(0.125));

  auto fine = small(a, {"t1", "t2", "t3"}, Mode::kFine, 3, 4, {2});
  fine.head_weight().value.fill(0.0f);
  fine.head_bias().value.fill(0.0f);
  for (double p : fine.predict_types({"some"}).probabilities) CHECK(p == doctest::Approx(0.5));
}

TEST_CASE("answer type scores") {
  TypePrediction pred{Mode::kFine, {0.9, 0.7, 0.1}};
  auto [s1, m1] = ntp_answer_scores(pred, {0});
  CHECK(s1 == doctest::Approx(0.9));
  CHECK(m1 == doctest::Approx(0.9));
  auto [s2, m2] = ntp_answer_scores(pred, {0, 1});
  CHECK(s2 == doctest::Approx(1.6));
  CHECK(m2 == doctest::Approx(0.9));
  auto [s3, m3] = ntp_answer_scores(pred, {});
  CHECK(s3 == 0.0);
  CHECK(m3 == 0.0);
}

TEST_CASE("type models fit separable toys") {
  std::vector<linker::AnalyzedQuestion> qs;
  std::mt19937_64 rng(8);
  const std::vector<std::vector<std::string>> vocab = {{"poet", "novel", "verse", "author"},
                                                       {"river", "mountain", "valley", "coast"}};
  for (std::size_t t = 0; t < 2; ++t)
    for (int i = 0; i < 12; ++i) {
      std::string text;
      for (int k = 0; k < 5; ++k) text += vocab[t][rng() % 4] + " ";
      qs.push_back(q("q" + std::to_string(t) + std::to_string(i), text));
    }
  NTPConfig cfg;
  cfg.d_word = 8;
  cfg.d_conv = 8;
  cfg.windows = {2, 3};
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.random_truncation = false;

  std::vector<TypedExample> coarse;
  for (std::size_t i = 0; i < qs.size(); ++i) coarse.push_back({&qs[i], {static_cast<int>(i / 12)}});
  auto cm = train_ntp(coarse, {}, {"person", "location"}, Mode::kCoarse, cfg, 1);
  CHECK(evaluate_types(cm, coarse).accuracy == 1.0);
  auto again = train_ntp(coarse, {}, {"person", "location"}, Mode::kCoarse, cfg, 1);
  CHECK(again.head_weight().value == cm.head_weight().value);

  std::vector<TypedExample> fine;
  for (std::size_t i = 0; i < qs.size(); ++i)
    fine.push_back({&qs[i], i < 12 ? std::vector<int>{0, 1} : std::vector<int>{2, 3}});
  auto fm = train_ntp(fine, {}, {"person", "person/author", "location", "location/river"}, Mode::kFine, cfg, 1);
  auto p = fm.predict_types(qs[0].words(qs[0].num_tokens())).probabilities;
  CHECK(p[0] > 0.5);
  CHECK(p[1] > 0.5);
  CHECK(p[2] < 0.5);

  std::vector<TypedExample> single;
  for (std::size_t i = 0; i < qs.size(); ++i) single.push_back({&qs[i], {0}});
  auto sm = train_ntp(single, {}, {"only", "other"}, Mode::kCoarse, cfg, 1);
  CHECK(sm.predict_types(qs[3].words(qs[3].num_tokens())).probabilities[0] > 0.9);
}

TEST_CASE("ntp gradients match finite differences") {
  for (auto mode : {Mode::kCoarse, Mode::kFine})
    for (std::uint64_t seed : {1u, 2u}) {
      auto r = check_gradients(mode, seed);
      CAPTURE(r.worst);
      CHECK(r.max_relative_error < 1e-3);
    }
}

TEST_CASE("coarse head is a distribution") {
  auto a = q("a", "alpha beta gamma delta");
  auto m = small(a, type_names_for(Mode::kCoarse), Mode::kCoarse, 4, 5, {2, 3});
  auto p = m.predict_types({"alpha", "gamma", "delta"}).probabilities;
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}
