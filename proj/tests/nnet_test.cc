#include <doctest.h>

#include <cmath>

#include "qb/error.h"
#include "qb/nnet.h"
#include "support.h"

using namespace qb::nnet;
using qb::testing::TempDir;

TEST_CASE("softmax closed forms") {
  auto half = softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));

  auto q = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-12));

  std::vector<double> x = {0.3, -1.2, 4.0, 2.2};
  auto a = softmax(x);
  for (auto& v : x) v += 1000.0;
  auto b = softmax(x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("log_sigmoid is stable") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
  CHECK(std::isfinite(log_sigmoid(-1000.0)));
  CHECK(log_sigmoid(-1000.0) == doctest::Approx(-1000.0));
  CHECK(log_sigmoid(1000.0) == doctest::Approx(0.0));
}

TEST_CASE("adam first step") {
  Parameter p("p", 1, 1);
  p.grad(0, 0) = 1.0f;
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(cfg);
  std::vector<Parameter*> ps = {&p};
  adam.step(ps);
  CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-5));

  Parameter q("q", 2, 2);
  q.value.fill(0.7f);
  Adam zero(cfg);
  std::vector<Parameter*> qs = {&q};
  zero.step(qs);
  for (float v : q.value.values()) CHECK(v == 0.7f);
}

TEST_CASE("optimizers are deterministic and skip frozen tensors") {
  auto run = [](bool frozen) {
    Parameter p("p", 3, 2);
    std::mt19937_64 rng(4);
    p.value.fill_uniform(-1.0f, 1.0f, rng);
    p.frozen = frozen;
    Adamax opt;
    std::vector<Parameter*> ps = {&p};
    for (int s = 0; s < 5; ++s) {
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad.values()[i] = p.value.values()[i];
      opt.step(ps);
    }
    return p.value;
  };
  CHECK(run(false) == run(false));
  Parameter ref("p", 3, 2);
  std::mt19937_64 rng(4);
  ref.value.fill_uniform(-1.0f, 1.0f, rng);
  CHECK(run(true) == ref.value);
}

TEST_CASE("gradient checker") {
  Parameter p("p", 2, 3);
  std::mt19937_64 rng(1);
  p.value.fill_uniform(0.5f, 2.0f, rng);
  auto loss = [&] {
    double s = 0.0;
    for (float v : p.value.values()) s += 0.5 * v * v;
    return s;
  };
  double factor = 1.0;
  auto grad = [&] {
    for (std::size_t i = 0; i < p.value.size(); ++i) p.grad.values()[i] = static_cast<float>(factor * p.value.values()[i]);
  };
  std::vector<Parameter*> ps = {&p};
  auto good = gradient_check(loss, grad, ps);
  CHECK(good.max_relative_error < 1e-6);
  CHECK(good.coordinates == 6);

  factor = 2.0;
  auto bad = gradient_check(loss, grad, ps);
  CHECK(bad.max_relative_error > 0.3);
}

TEST_CASE("embedding table file format") {
  TempDir dir;
  auto ok = dir.write("e.txt", "2 4\nkafka 1 2 3 4\nENTITY/Franz_Kafka 0.5 0.5 0.5 0.5\n");
  auto t = EmbeddingTable::load(ok, 4);
  CHECK(t.vocab_size() == 2);
  CHECK(t.dim() == 4);
  CHECK(t.index("kafka") == 0);
  CHECK(t.table()(0, 3) == 4.0f);
  CHECK(t.index("missing") == -1);

  CHECK_THROWS_AS(EmbeddingTable::load(dir.write("short.txt", "1 4\nkafka 1 2 3\n"), 4), qb::Error);
  CHECK_THROWS_AS(EmbeddingTable::load(dir.write("dup.txt", "2 2\na 1 2\na 3 4\n"), 2), qb::Error);

  t.save(dir.file("round.txt"));
  auto back = EmbeddingTable::load(dir.file("round.txt"), 4);
  CHECK(back.tokens() == t.tokens());
  CHECK(back.table() == t.table());
}

TEST_CASE("entity tokens") {
  CHECK(entity_token("The Metamorphosis (novella)") == "ENTITY/The_Metamorphosis_(novella)");
}

TEST_CASE("tensor persistence detects corruption") {
  TempDir dir;
  Matrix m(2, 3);
  std::mt19937_64 rng(2);
  m.fill_uniform(-1.0f, 1.0f, rng);
  save_tensors(dir.path().string(), "t", {{"k", 1}}, {{"m", &m}});
  auto loaded = load_tensors(dir.path().string(), "t");
  CHECK(loaded.tensors.at("m") == m);
  CHECK(loaded.meta.at("k") == 1);
}
