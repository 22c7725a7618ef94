#include <filesystem>
#include <fstream>

#include "qb/error.h"
#include "qb/pipeline.h"

namespace qb::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigVersion = 1;

std::string resolve(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

scorer::StackConfig PipelineConfig::stack_config() const {
  scorer::StackConfig s;
  s.nqs = nqs;
  s.ntp = ntp;
  s.boost = boost;
  s.folds = folds;
  s.truncations = truncations;
  s.use_fine = use_fine;
  s.top_k = top_k;
  s.threads = threads;
  return s;
}

json PipelineConfig::to_json() const {
  return {
      {"v", kConfigVersion},
      {"paths",
       {{"dataset", paths.dataset},
        {"embeddings", paths.embeddings},
        {"mentions", paths.mentions},
        {"types", paths.types},
        {"wiki", paths.wiki},
        {"aliases", paths.aliases},
        {"work_dir", paths.work_dir}}},
      {"seed", seed},
      {"min_answer_count", min_answer_count},
      {"linker", {{"keyphraseness_min", thresholds.keyphraseness_min},
                  {"link_probability_min", thresholds.link_probability_min}}},
      {"nqs",
       {{"dim", nqs.dim},
        {"learning_rate", nqs.learning_rate},
        {"batch_size", nqs.batch_size},
        {"dropout", nqs.dropout},
        {"max_epochs", nqs.max_epochs},
        {"patience", nqs.patience},
        {"identity_projection", nqs.identity_projection},
        {"random_truncation", nqs.random_truncation}}},
      {"ntp",
       {{"d_word", ntp.d_word},
        {"d_conv", ntp.d_conv},
        {"windows", ntp.windows},
        {"learning_rate", ntp.learning_rate},
        {"batch_size", ntp.batch_size},
        {"max_epochs", ntp.max_epochs},
        {"patience", ntp.patience},
        {"random_truncation", ntp.random_truncation}}},
      {"gbrt",
       {{"learning_rate", boost.learning_rate},
        {"max_leaves", boost.max_leaves},
        {"min_leaf_samples", boost.min_leaf_samples},
        {"l2_lambda", boost.l2_lambda},
        {"max_rounds", boost.max_rounds},
        {"early_stop_rounds", boost.early_stop_rounds}}},
      {"stack",
       {{"folds", folds}, {"truncations", truncations}, {"use_fine", use_fine}, {"top_k", top_k}, {"threads", threads}}},
      {"buzz",
       {{"threshold", buzz.threshold},
        {"min_words", buzz.min_words},
        {"stride", buzz.stride},
        {"answer_at_end", buzz.answer_at_end}}},
      {"rules",
       {{"correct_points", rules.correct_points},
        {"interrupt_wrong_points", rules.interrupt_wrong_points},
        {"end_wrong_points", rules.end_wrong_points}}},
      {"server",
       {{"host", server.host},
        {"port", server.port},
        {"word_interval_ms", server.word_interval_ms},
        {"answer_timeout_ms", server.answer_timeout_ms},
        {"questions_per_match", server.questions_per_match}}},
  };
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  if (j.value("v", kConfigVersion) != kConfigVersion) throw Error("unsupported config version");
  PipelineConfig c;
  try {
    if (auto p = j.find("paths"); p != j.end()) {
      read(*p, "dataset", c.paths.dataset);
      read(*p, "embeddings", c.paths.embeddings);
      read(*p, "mentions", c.paths.mentions);
      read(*p, "types", c.paths.types);
      read(*p, "wiki", c.paths.wiki);
      read(*p, "aliases", c.paths.aliases);
      read(*p, "work_dir", c.paths.work_dir);
    }
    read(j, "seed", c.seed);
    read(j, "min_answer_count", c.min_answer_count);
    if (auto p = j.find("linker"); p != j.end()) {
      read(*p, "keyphraseness_min", c.thresholds.keyphraseness_min);
      read(*p, "link_probability_min", c.thresholds.link_probability_min);
    }
    if (auto p = j.find("nqs"); p != j.end()) {
      read(*p, "dim", c.nqs.dim);
      read(*p, "learning_rate", c.nqs.learning_rate);
      read(*p, "batch_size", c.nqs.batch_size);
      read(*p, "dropout", c.nqs.dropout);
      read(*p, "max_epochs", c.nqs.max_epochs);
      read(*p, "patience", c.nqs.patience);
      read(*p, "identity_projection", c.nqs.identity_projection);
      read(*p, "random_truncation", c.nqs.random_truncation);
    }
    if (auto p = j.find("ntp"); p != j.end()) {
      read(*p, "d_word", c.ntp.d_word);
      read(*p, "d_conv", c.ntp.d_conv);
      read(*p, "windows", c.ntp.windows);
      read(*p, "learning_rate", c.ntp.learning_rate);
      read(*p, "batch_size", c.ntp.batch_size);
      read(*p, "max_epochs", c.ntp.max_epochs);
      read(*p, "patience", c.ntp.patience);
      read(*p, "random_truncation", c.ntp.random_truncation);
    }
    if (auto p = j.find("gbrt"); p != j.end()) {
      read(*p, "learning_rate", c.boost.learning_rate);
      read(*p, "max_leaves", c.boost.max_leaves);
      read(*p, "min_leaf_samples", c.boost.min_leaf_samples);
      read(*p, "l2_lambda", c.boost.l2_lambda);
      read(*p, "max_rounds", c.boost.max_rounds);
      read(*p, "early_stop_rounds", c.boost.early_stop_rounds);
    }
    if (auto p = j.find("stack"); p != j.end()) {
      read(*p, "folds", c.folds);
      read(*p, "truncations", c.truncations);
      read(*p, "use_fine", c.use_fine);
      read(*p, "top_k", c.top_k);
      read(*p, "threads", c.threads);
    }
    if (auto p = j.find("buzz"); p != j.end()) {
      read(*p, "threshold", c.buzz.threshold);
      read(*p, "min_words", c.buzz.min_words);
      read(*p, "stride", c.buzz.stride);
      read(*p, "answer_at_end", c.buzz.answer_at_end);
    }
    if (auto p = j.find("rules"); p != j.end()) {
      read(*p, "correct_points", c.rules.correct_points);
      read(*p, "interrupt_wrong_points", c.rules.interrupt_wrong_points);
      read(*p, "end_wrong_points", c.rules.end_wrong_points);
    }
    if (auto p = j.find("server"); p != j.end()) {
      read(*p, "host", c.server.host);
      read(*p, "port", c.server.port);
      read(*p, "word_interval_ms", c.server.word_interval_ms);
      read(*p, "answer_timeout_ms", c.server.answer_timeout_ms);
      read(*p, "questions_per_match", c.server.questions_per_match);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid config value: ") + e.what());
  }
  for (auto* p : {&c.paths.dataset, &c.paths.embeddings, &c.paths.mentions, &c.paths.types, &c.paths.wiki,
                  &c.paths.aliases, &c.paths.work_dir})
    *p = resolve(*p, base_dir);
  c.boost.validate();
  c.buzz.validate();
  if (c.nqs.dim == 0 || c.ntp.d_word == 0 || c.ntp.d_conv == 0 || c.ntp.windows.empty())
    throw Error("model dimensions must be positive");
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path().string());
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json().dump(2) << '\n';
}

std::string Layout::split(const std::string& name) const { return (fs::path(root) / "data" / (name + ".jsonl")).string(); }
std::string Layout::answers() const { return (fs::path(root) / "data" / "answers.txt").string(); }
std::string Layout::index() const { return (fs::path(root) / "index").string(); }
std::string Layout::models() const { return (fs::path(root) / "models").string(); }
std::string Layout::stack() const { return (fs::path(root) / "stack").string(); }
std::string Layout::features() const { return (fs::path(root) / "stack" / "features.bin").string(); }

Layout layout(const PipelineConfig& config) { return Layout{config.paths.work_dir}; }

PipelineConfig compact_config() {
  PipelineConfig c;
  c.nqs.dim = 48;
  c.nqs.max_epochs = 20;
  c.nqs.learning_rate = 0.005;
  c.ntp.d_word = 16;
  c.ntp.d_conv = 32;
  c.ntp.windows = {2, 3};
  c.ntp.max_epochs = 10;
  c.ntp.learning_rate = 0.005;
  c.boost.learning_rate = 0.1;
  c.boost.max_leaves = 31;
  c.boost.max_rounds = 500;
  c.boost.early_stop_rounds = 30;
  c.folds = 5;
  c.truncations = 3;
  return c;
}

}  // namespace qb::pipeline
