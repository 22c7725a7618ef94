#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <iostream>

#include "qb/error.h"
#include "qb/nqs.h"
#include "qb/ntp.h"
#include "qb/pipeline.h"
#include "qb/service.h"
#include "qb/synth.h"

namespace {

namespace fs = std::filesystem;
using namespace qb;

constexpr double kGradTolerance = 1e-3;

int gradcheck(std::uint64_t seed) {
  struct Row {
    const char* name;
    nnet::GradCheckResult r;
  };
  std::vector<Row> rows = {
      {"nqs", nqs::check_gradients(seed)},
      {"ntp.coarse", ntp::check_gradients(ntp::Mode::kCoarse, seed)},
      {"ntp.fine", ntp::check_gradients(ntp::Mode::kFine, seed)},
  };
  bool ok = true;
  for (const auto& [name, r] : rows) {
    bool pass = r.max_relative_error < kGradTolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << name << " max_rel_err " << r.max_relative_error << " over "
              << r.coordinates << " coordinates (worst " << r.worst << ")\n";
  }
  return ok ? 0 : 1;
}

int simulate(const pipeline::PipelineConfig& c, const std::string& opponent_path, std::size_t n, std::uint64_t seed,
             const std::string& log_path) {
  auto engine = pipeline::Engine::load(c);
  std::unique_ptr<pipeline::Engine> other;
  pipeline::PipelineConfig oc = c;
  if (!opponent_path.empty()) {
    oc = pipeline::PipelineConfig::load(opponent_path);
    other = pipeline::Engine::load(oc);
  }
  auto questions = pipeline::match_questions(*engine, n);
  if (questions.empty()) throw Error("no test questions to play");
  pipeline::EngineGuesser ga(*engine), gb(other ? *other : *engine);
  match::EnginePlayer a(ga, c.buzz), b(gb, oc.buzz);
  auto result = match::run_match(a, b, questions, c.rules, seed);
  if (!log_path.empty()) match::write_log(log_path, result.log);
  for (const auto& q : result.questions) std::cout << q.question_id << " " << q.delta_a << " " << q.delta_b << "\n";
  std::cout << "score a " << result.score_a << " b " << result.score_b << " over " << questions.size()
            << " questions\n";
  return 0;
}

qb::service::MatchService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int serve(const pipeline::PipelineConfig& c) {
  auto engine = pipeline::Engine::load(c);
  auto questions = pipeline::match_questions(*engine, static_cast<std::size_t>(-1));
  if (questions.empty()) throw Error("no test questions to serve");
  service::ServiceOptions opt;
  opt.default_word_interval_ms = c.server.word_interval_ms;
  opt.answer_timeout_ms = c.server.answer_timeout_ms;
  opt.questions_per_match = c.server.questions_per_match;
  opt.policy = c.buzz;
  opt.rules = c.rules;
  const pipeline::Engine* shared = engine.get();
  service::MatchService svc(std::move(questions),
                            [shared] { return std::make_unique<pipeline::EngineGuesser>(*shared); }, opt);
  std::string host = c.server.host;
  int port = c.server.port;
  service::bind_address_from_env(host, port);
  g_service = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on " << host << ":" << port << "\n";
  bool ok = svc.listen(host, port);
  g_service = nullptr;
  if (!ok) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

int synth_corpus(const std::string& out, std::size_t answers, std::size_t per_answer, std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.answers = answers;
  sc.questions_per_answer = per_answer;
  sc.seed = seed;
  fs::create_directories(out);
  synth::write_corpus(out, synth::generate(sc));
  auto c = pipeline::compact_config();
  c.paths.dataset = "dataset.jsonl";
  c.paths.wiki = "wiki.txt";
  c.paths.mentions = "mentions.tsv";
  c.paths.types = "types.tsv";
  c.paths.aliases = "aliases.tsv";
  c.paths.work_dir = "work";
  c.seed = seed;
  c.save((fs::path(out) / "config.json").string());
  std::cout << "wrote " << answers * per_answer << " questions and config.json to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quiz bowl question answering pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  };

  auto* ingest = app.add_subcommand("ingest", "split and filter the dataset");
  auto* index = app.add_subcommand("build-index", "build the IR collections");
  auto* nqs_cmd = app.add_subcommand("train-nqs", "train the question-answer similarity model");
  auto* ntp_cmd = app.add_subcommand("train-ntp", "train the answer type predictors");
  auto* scorer_cmd = app.add_subcommand("train-scorer", "train the stacked GBRT scorer");
  bool ablation = false;
  scorer_cmd->add_flag("--ablation", ablation, "also train the ablation scorers");
  auto* eval_cmd = app.add_subcommand("eval", "accuracy on the test split");
  std::string prefix = "all";
  eval_cmd->add_option("--prefix", prefix, "1, 2, 3, full or all")
      ->check(CLI::IsMember({"1", "2", "3", "full", "all"}));
  auto* sim = app.add_subcommand("simulate", "engine vs engine match on test questions");
  std::string opponent;
  std::size_t n_questions = 20;
  std::uint64_t match_seed = 1;
  std::string log_path;
  sim->add_option("--opponent", opponent, "config of the side-b engine (default: same engine)")
      ->check(CLI::ExistingFile);
  sim->add_option("-n,--questions", n_questions, "questions to play");
  sim->add_option("--seed", match_seed, "tie-break seed");
  sim->add_option("--log", log_path, "write the JSON-lines match log here");
  auto* serve_cmd = app.add_subcommand("serve", "host live matches over HTTP");
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::uint64_t grad_seed = 3;
  grad->add_option("--seed", grad_seed, "seed for the random fixtures");
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus and config");
  std::string synth_out;
  std::size_t synth_answers = 50, synth_per_answer = 20;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("-o,--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--answers", synth_answers, "distinct answers");
  synth_cmd->add_option("--per-answer", synth_per_answer, "questions per answer");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  for (auto* sub : {ingest, index, nqs_cmd, ntp_cmd, scorer_cmd, eval_cmd, sim, serve_cmd}) add_config(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*grad) return gradcheck(grad_seed);
    if (*synth_cmd) return synth_corpus(synth_out, synth_answers, synth_per_answer, synth_seed);
    auto config = pipeline::PipelineConfig::load(config_path);
    if (*ingest) pipeline::ingest(config, std::cout);
    if (*index) pipeline::build_index(config, std::cout);
    if (*nqs_cmd) pipeline::train_nqs(config, std::cout);
    if (*ntp_cmd) pipeline::train_ntp(config, std::cout);
    if (*scorer_cmd) pipeline::train_scorer(config, ablation, std::cout);
    if (*eval_cmd) pipeline::eval(config, prefix, std::cout);
    if (*sim) return simulate(config, opponent, n_questions, match_seed, log_path);
    if (*serve_cmd) return serve(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
