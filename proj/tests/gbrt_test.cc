#include <doctest.h>

#include <cmath>

#include "qb/error.h"
#include "qb/gbrt.h"
#include "support.h"

using namespace qb::gbrt;

namespace {

void logistic_grad(const Dataset& d, double raw, std::vector<double>& g, std::vector<double>& h) {
  g.assign(d.rows, 0.0);
  h.assign(d.rows, 0.0);
  double p = 1.0 / (1.0 + std::exp(-raw));
  for (std::size_t i = 0; i < d.rows; ++i) {
    g[i] = p - d.y[i];
    h[i] = p * (1.0 - p);
  }
}

Dataset separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Dataset d(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    float a = u(rng), b = u(rng);
    d.at(i, 0) = a;
    d.at(i, 1) = b;
    d.y[i] = a + 0.5f * b > 0.0f ? 1.0f : 0.0f;
  }
  return d;
}

}  // namespace

TEST_CASE("constant features give a single leaf") {
  Dataset d(30, 3);
  for (auto& v : d.x) v = 1.5f;
  std::vector<double> g(30), h(30, 0.25);
  double G = 0.0, H = 7.5;
  for (std::size_t i = 0; i < 30; ++i) {
    g[i] = i % 3 == 0 ? 0.5 : -0.2;
    G += g[i];
  }
  BoostConfig cfg;
  cfg.min_leaf_samples = 1;
  auto t = fit_tree(d, g, h, cfg);
  CHECK(t.num_leaves() == 1);
  CHECK(t.value[0] == doctest::Approx(-G / (H + 1.0)));
}

TEST_CASE("one feature split at the midpoint") {
  Dataset d(6, 1);
  const float xs[] = {1, 2, 3, 7, 8, 9};
  for (std::size_t i = 0; i < 6; ++i) {
    d.at(i, 0) = xs[i];
    d.y[i] = i < 3 ? 0.0f : 1.0f;
  }
  std::vector<double> g, h;
  logistic_grad(d, 0.0, g, h);
  BoostConfig cfg;
  cfg.min_leaf_samples = 1;
  auto s = best_root_split(d, g, h, cfg);
  CHECK(s.feature == 0);
  CHECK(s.threshold == doctest::Approx(5.0));
  CHECK(s.n_left == 3);
  // Gains at the other boundaries are lower, computed by hand.
  CHECK(s.gain == doctest::Approx(split_gain(-1.5, 0.75, 1.5, 0.75, 1.0)));
  CHECK(split_gain(-1.5, 0.75, 1.5, 0.75, 1.0) > split_gain(-1.0, 0.5, 1.0, 1.0, 1.0));

  cfg.max_leaves = 8;
  auto t = fit_tree(d, g, h, cfg);
  CHECK(t.num_leaves() == 2);

  cfg.min_leaf_samples = 4;
  CHECK(best_root_split(d, g, h, cfg).feature == -1);
  CHECK(fit_tree(d, g, h, cfg).num_leaves() == 1);
}

TEST_CASE("root split matches exhaustive search") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto d = qb::testing::random_dataset(rng, 5 + rng() % 196, 1 + rng() % 5);
    std::vector<double> g, h;
    logistic_grad(d, 0.3, g, h);
    BoostConfig cfg;
    cfg.min_leaf_samples = 1 + static_cast<int>(rng() % 10);
    auto got = best_root_split(d, g, h, cfg);
    auto ref = qb::testing::exhaustive_split(d, g, h, cfg.l2_lambda, cfg.min_leaf_samples);
    CAPTURE(trial);
    CHECK((got.feature < 0) == (ref.best.feature < 0));
    if (ref.best.feature < 0) continue;
    CHECK(got.gain == doctest::Approx(ref.best.gain).epsilon(1e-9));
    // Equal-gain partitions on different features differ only by rounding.
    if (ref.best.gain - ref.runner_up_gain > 1e-9 * ref.best.gain) {
      CHECK(got.feature == ref.best.feature);
      CHECK(got.threshold == ref.best.threshold);
    }
  }
}

TEST_CASE("training logloss never increases") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto d = qb::testing::random_dataset(rng, 80 + rng() % 100, 4);
    BoostConfig cfg;
    cfg.learning_rate = 0.3;
    cfg.max_leaves = 8;
    cfg.min_leaf_samples = 5;
    cfg.max_rounds = 40;
    cfg.early_stop_rounds = 40;
    TrainLog log;
    train(d, Dataset(0, 4), cfg, &log);
    for (std::size_t r = 1; r < log.train_logloss.size(); ++r)
      CHECK(log.train_logloss[r] <= log.train_logloss[r - 1] + 1e-12);
  }
}

TEST_CASE("separable toy reaches high auc") {
  auto d = separable(200, 4);
  BoostConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.max_leaves = 8;
  cfg.min_leaf_samples = 5;
  cfg.max_rounds = 200;
  auto m = train(d, Dataset(0, 2), cfg);
  CHECK(m.trees().size() <= 200);
  CHECK(auc(d.y, m.predict_proba(d)) >= 0.99);
}

TEST_CASE("flipped labels give complementary probabilities") {
  auto d = separable(120, 9);
  for (std::size_t i = 0; i < 10; ++i) d.y[i] = 1.0f - d.y[i];
  auto flipped = d;
  for (auto& y : flipped.y) y = 1.0f - y;
  BoostConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.max_leaves = 6;
  cfg.min_leaf_samples = 3;
  cfg.max_rounds = 30;
  auto a = train(d, Dataset(0, 2), cfg).predict_proba(d);
  auto b = train(flipped, Dataset(0, 2), cfg).predict_proba(d);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] + b[i] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("model arithmetic") {
  GBRTModel empty(0.4, 0.1, 1);
  float x[] = {0.0f};
  CHECK(empty.predict_proba(x) == doctest::Approx(1.0 / (1.0 + std::exp(-0.4))));

  auto d = separable(50, 2);
  double pos = 0;
  for (float y : d.y) pos += y;
  auto m = train(d, Dataset(0, 2), BoostConfig{});
  m.truncate(0);
  for (double p : m.predict_proba(d)) CHECK(p == doctest::Approx(pos / 50.0));

  // One stump: x <= 0.5 -> -1, else +2, learning rate 0.5, base 0.
  GBRTModel stump(0.0, 0.5, 1);
  RegressionTree t;
  t.feature = {0, -1, -1};
  t.threshold = {0.5, 0.0, 0.0};
  t.left = {1, -1, -1};
  t.right = {2, -1, -1};
  t.value = {0.0, -1.0, 2.0};
  stump.add_tree(t);
  float lo[] = {0.2f}, hi[] = {0.9f};
  CHECK(stump.predict_proba(lo) == doctest::Approx(1.0 / (1.0 + std::exp(0.5))));
  CHECK(stump.predict_proba(hi) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

  auto raised = stump;
  RegressionTree up;
  up.feature = {-1};
  up.threshold = {0.0};
  up.left = {-1};
  up.right = {-1};
  up.value = {0.3};
  raised.add_tree(up);
  CHECK(raised.predict_proba(lo) > stump.predict_proba(lo));
  CHECK(raised.predict_proba(hi) > stump.predict_proba(hi));

  float two[] = {0.0f, 1.0f};
  CHECK_THROWS_AS(stump.predict_proba(two), qb::Error);
}

TEST_CASE("model json round trip and validation") {
  auto d = separable(80, 5);
  BoostConfig cfg;
  cfg.max_rounds = 10;
  cfg.min_leaf_samples = 5;
  auto m = train(d, Dataset(0, 2), cfg);
  m.feature_names() = {"a", "b"};
  auto back = GBRTModel::from_json(m.to_json());
  CHECK(back.trees() == m.trees());
  CHECK(back.predict_proba(d) == m.predict_proba(d));
  CHECK(back.feature_names() == m.feature_names());
  CHECK_THROWS_AS(GBRTModel::from_json("{\"format\":\"other\"}"), qb::Error);
  CHECK_THROWS_AS(GBRTModel::from_json("not json"), qb::Error);
}

TEST_CASE("early stopping keeps the best round") {
  std::mt19937_64 rng(7);
  auto d = qb::testing::random_dataset(rng, 150, 3);
  auto dev = qb::testing::random_dataset(rng, 60, 3);
  BoostConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.max_leaves = 16;
  cfg.min_leaf_samples = 2;
  cfg.max_rounds = 200;
  cfg.early_stop_rounds = 5;
  TrainLog log;
  auto m = train(d, dev, cfg, &log);
  CHECK(static_cast<int>(m.trees().size()) == log.best_rounds);
  auto best = std::min_element(log.dev_logloss.begin(), log.dev_logloss.end());
  CHECK(best - log.dev_logloss.begin() == log.best_rounds);
}

TEST_CASE("single class labels are rejected") {
  Dataset d(10, 1);
  CHECK_THROWS_AS(train(d, Dataset(0, 1), BoostConfig{}), qb::Error);
}

TEST_CASE("feature mask blocks splits") {
  auto d = separable(100, 3);
  BoostConfig cfg;
  cfg.min_leaf_samples = 2;
  cfg.feature_mask = {0, 1};
  std::vector<double> g, h;
  logistic_grad(d, 0.0, g, h);
  CHECK(best_root_split(d, g, h, cfg).feature == 1);
}

TEST_CASE("auc with ties") {
  std::vector<float> y = {0, 1, 0, 1};
  CHECK(auc(y, std::vector<double>{0.1, 0.9, 0.2, 0.8}) == 1.0);
  CHECK(auc(y, std::vector<double>{0.5, 0.5, 0.5, 0.5}) == 0.5);
  CHECK(auc(std::vector<float>{1, 1}, std::vector<double>{0.1, 0.2}) == 0.5);
  CHECK(logloss(std::vector<float>{1, 0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
}
