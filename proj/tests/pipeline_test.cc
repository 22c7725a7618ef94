#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qb/error.h"
#include "qb/pipeline.h"
#include "qb/synth.h"
#include "support.h"

using namespace qb;
using namespace qb::pipeline;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run(const std::string& args) {
  std::string cmd = std::string(QB_CLI_PATH) + " " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("config round trip") {
  PipelineConfig c = compact_config();
  c.paths.dataset = "/abs/data.jsonl";
  c.seed = 99;
  c.ntp.windows = {2, 4};
  c.buzz.threshold = 0.7;
  c.rules.interrupt_wrong_points = -10;
  c.server.port = 9000;
  auto back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  qb::testing::TempDir dir;
  c.paths.wiki = "wiki.txt";
  c.save(dir.file("config.json"));
  auto loaded = PipelineConfig::load(dir.file("config.json"));
  CHECK(loaded.paths.wiki == dir.file("wiki.txt"));
  CHECK(loaded.paths.dataset == "/abs/data.jsonl");
  CHECK(loaded.ntp.windows == std::vector<std::size_t>{2, 4});
  CHECK(loaded.rules.interrupt_wrong_points == -10);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), qb::Error);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"v", 2}}), qb::Error);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"nqs", {{"dim", "wide"}}}}), qb::Error);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"buzz", {{"stride", 0}}}}), qb::Error);
  CHECK_THROWS_AS(PipelineConfig::load("/nonexistent/config.json"), qb::Error);
  auto defaults = PipelineConfig::from_json(nlohmann::json::object());
  CHECK(defaults.nqs.dim == 300);
  CHECK(defaults.buzz.min_words == 15);
}

TEST_CASE("cli usage errors exit 2") {
  CHECK(run("").exit_code == 2);
  CHECK(run("frobnicate").exit_code == 2);
  CHECK(run("ingest").exit_code == 2);
  CHECK(run("ingest -c /nonexistent/config.json").exit_code == 2);
  CHECK(run("eval -c /nonexistent/config.json --prefix 7").exit_code == 2);
}

TEST_CASE("cli gradcheck") {
  auto r = run("gradcheck");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS nqs") != std::string::npos);
  CHECK(r.output.find("PASS ntp.coarse") != std::string::npos);
  CHECK(r.output.find("PASS ntp.fine") != std::string::npos);
}

TEST_CASE("cli pipeline on a toy corpus") {
  qb::testing::TempDir dir;
  auto d = dir.path().string();
  REQUIRE(run("synth -o " + d + " --answers 8 --per-answer 10 --seed 3").exit_code == 0);
  auto cfg_path = dir.file("config.json");
  auto c = PipelineConfig::load(cfg_path);
  c.nqs.dim = 16;
  c.nqs.max_epochs = 8;
  c.ntp.d_word = 8;
  c.ntp.d_conv = 8;
  c.ntp.max_epochs = 3;
  c.folds = 3;
  c.truncations = 2;
  c.boost.min_leaf_samples = 10;
  c.boost.max_rounds = 100;
  c.paths.work_dir = dir.file("work");
  c.save(cfg_path);

  // Stages out of order fail cleanly.
  auto early = run("train-scorer -c " + cfg_path);
  CHECK(early.exit_code == 1);
  CHECK(early.output.find("run ingest first") != std::string::npos);

  for (const char* stage : {"ingest", "build-index", "train-nqs", "train-ntp"}) {
    auto r = run(std::string(stage) + " -c " + cfg_path);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
  }
  auto scorer = run("train-scorer --ablation -c " + cfg_path);
  CAPTURE(scorer.output);
  REQUIRE(scorer.exit_code == 0);
  CHECK(scorer.output.find("leakage violations 0") != std::string::npos);
  CHECK(std::filesystem::exists(dir.file("work/stack/features.bin")));
  CHECK(std::filesystem::exists(dir.file("work/stack/ablation_nqs+ir.json")));

  auto eval = run("eval --prefix full -c " + cfg_path);
  CAPTURE(eval.output);
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("accuracy@full ") != std::string::npos);
  CHECK(eval.output.find("nqs+ir+ntp") != std::string::npos);
  CHECK(eval.output.find("accuracy@1 ") == std::string::npos);

  auto sim = run("simulate -n 3 --seed 2 --log " + dir.file("m.log") + " -c " + cfg_path);
  CAPTURE(sim.output);
  REQUIRE(sim.exit_code == 0);
  CHECK(sim.output.find("score a ") != std::string::npos);
  auto again = run("simulate -n 3 --seed 2 --log " + dir.file("m2.log") + " -c " + cfg_path);
  std::ifstream l1(dir.file("m.log")), l2(dir.file("m2.log"));
  std::stringstream s1, s2;
  s1 << l1.rdbuf();
  s2 << l2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK_FALSE(s1.str().empty());
}

TEST_CASE("ablation masks") {
  auto masks = ablation_masks();
  REQUIRE(masks.size() == 4);
  for (const auto& [name, m] : masks) {
    REQUIRE(m.size() == scorer::kNumFeatures);
    for (int e = 3 * scorer::kNumBaseScores; e < scorer::kNumFeatures; ++e) CHECK(m[static_cast<std::size_t>(e)] == 1);
  }
  const auto& nqs_only = masks[0].second;
  CHECK(nqs_only[0] == 1);
  CHECK(nqs_only[3 * scorer::kNtpCoarseSum] == 0);
  CHECK(nqs_only[3 * scorer::kIrFirst] == 0);
}

TEST_CASE("synthetic corpus files") {
  synth::SynthConfig sc;
  sc.answers = 5;
  sc.questions_per_answer = 6;
  auto a = synth::generate(sc), b = synth::generate(sc);
  CHECK(a.records.size() == 30);
  CHECK(a.wiki.size() == 5);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].text == b.records[i].text);
  qb::testing::TempDir dir;
  synth::write_corpus(dir.path().string(), a);
  for (const char* f : {"dataset.jsonl", "wiki.txt", "mentions.tsv", "types.tsv", "aliases.tsv"})
    CHECK(std::filesystem::exists(dir.file(f)));
  CHECK(ir::load_wiki(dir.file("wiki.txt")).size() == 5);
  CHECK(corpus::ingest_dataset(dir.file("dataset.jsonl"), corpus::AliasTable::load(dir.file("aliases.tsv"))).size() ==
        30);
}
