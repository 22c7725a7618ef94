#pragma once

#include <cstdint>
#include <json.hpp>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "qb/corpus.h"
#include "qb/entity_linker.h"
#include "qb/gbrt.h"
#include "qb/ir.h"
#include "qb/match.h"
#include "qb/nqs.h"
#include "qb/ntp.h"
#include "qb/scorer.h"

namespace qb::pipeline {

struct Paths {
  std::string dataset;
  std::string embeddings;  // optional
  std::string mentions;
  std::string types;
  std::string wiki;
  std::string aliases;  // optional
  std::string work_dir = "work";
};

struct ServerSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  int word_interval_ms = 250;
  int answer_timeout_ms = 8000;
  std::size_t questions_per_match = 5;
};

// Everything a pipeline run needs. Relative paths are resolved against the
// directory of the config file.
struct PipelineConfig {
  Paths paths;
  std::uint64_t seed = 13;
  int min_answer_count = 5;
  linker::Thresholds thresholds;
  nqs::NQSConfig nqs;
  ntp::NTPConfig ntp;
  gbrt::BoostConfig boost;
  int folds = 10;
  int truncations = 5;
  bool use_fine = true;
  std::size_t top_k = 5;
  unsigned threads = 1;
  match::BuzzPolicy buzz;
  match::ScoringRules rules;
  ServerSettings server;

  scorer::StackConfig stack_config() const;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;
};

// Locations of stage outputs under work_dir.
struct Layout {
  std::string root;
  std::string split(const std::string& name) const;  // train / dev / test
  std::string answers() const;
  std::string index() const;
  std::string models() const;
  std::string stack() const;
  std::string features() const;
};
Layout layout(const PipelineConfig& config);

// Small dimensions and short schedules, sized for corpora of a few thousand
// questions.
PipelineConfig compact_config();

// Stages; each reads the previous stages' outputs and writes its own,
// printing a short report.
void ingest(const PipelineConfig& config, std::ostream& log);
void build_index(const PipelineConfig& config, std::ostream& log);
void train_nqs(const PipelineConfig& config, std::ostream& log);
void train_ntp(const PipelineConfig& config, std::ostream& log);
void train_scorer(const PipelineConfig& config, bool ablation, std::ostream& log);
match::EvalReport eval(const PipelineConfig& config, const std::string& prefix, std::ostream& log);

// Feature masks for ablation rows, keyed by row name.
std::vector<std::pair<std::string, std::vector<char>>> ablation_masks();

// Questions of one split with their analysis.
struct AnalyzedSplit {
  std::vector<corpus::QuestionRecord> records;
  std::vector<linker::AnalyzedQuestion> questions;
  std::vector<scorer::LabeledQuestion> labeled(const corpus::AnswerCatalog& catalog) const;
};
AnalyzedSplit analyze_split(const std::vector<corpus::QuestionRecord>& records, const linker::MentionDictionary& dict,
                            linker::Thresholds thresholds);

// Trained stack with its indexes and resources, ready to answer questions.
class Engine {
 public:
  static std::unique_ptr<Engine> load(const PipelineConfig& config);

  linker::AnalyzedQuestion analyze(const std::string& id, const std::string& text) const;
  std::vector<scorer::RankedAnswer> rank(const linker::AnalyzedQuestion& q, std::size_t n_tokens) const;
  std::vector<std::string> aliases_of(const std::string& title) const;

  const PipelineConfig& config() const { return config_; }
  const ir::Collections& collections() const { return ir_; }
  const corpus::TypeAssignment& types() const { return types_; }
  const scorer::TrainedStack& stack() const { return stack_; }
  const std::vector<corpus::QuestionRecord>& test_records() const { return test_; }

 private:
  PipelineConfig config_;
  linker::MentionDictionary dict_;
  ir::Collections ir_;
  corpus::TypeAssignment types_;
  scorer::TrainedStack stack_;
  corpus::AliasTable aliases_;
  std::vector<corpus::QuestionRecord> test_;
};

// Guesser backed by an engine's top-ranked answer.
class EngineGuesser : public match::Guesser {
 public:
  explicit EngineGuesser(const Engine& engine) : engine_(&engine) {}
  match::Guess guess(const match::MatchQuestion& q, std::size_t revealed) override;

 private:
  const Engine* engine_;
};

std::vector<match::MatchQuestion> match_questions(const Engine& engine, std::size_t limit);

}  // namespace qb::pipeline
