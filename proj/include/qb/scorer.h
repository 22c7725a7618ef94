#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qb/corpus.h"
#include "qb/entity_linker.h"
#include "qb/gbrt.h"
#include "qb/ir.h"
#include "qb/nqs.h"
#include "qb/ntp.h"

namespace qb::scorer {

inline constexpr int kNumBaseScores = 2 + 4 + ir::kNumScores;  // 38
inline constexpr int kNumExtraFeatures = 4;
inline constexpr int kNumFeatures = 3 * kNumBaseScores + kNumExtraFeatures;  // 118
inline constexpr int kFeatureLayoutVersion = 1;

enum BaseScore : int {
  kNqsProb = 0,
  kNqsLogit = 1,
  kNtpCoarseSum = 2,
  kNtpCoarseMax = 3,
  kNtpFineSum = 4,
  kNtpFineMax = 5,
  kIrFirst = 6,
};

using ScoreBundle = std::array<double, kNumBaseScores>;
using FeatureVector = std::array<float, kNumFeatures>;

const std::vector<std::string>& base_score_names();
// For base score s: value at 3s, rank at 3s+1, margin at 3s+2; extras last.
const std::vector<std::string>& feature_names();

struct QuestionExtras {
  std::size_t word_count = 0;
  std::size_t sentence_count = 0;
};

// Tokens of the answer title (underscores as spaces, trailing parenthetical
// dropped) occur contiguously in the lowercased question words.
bool answer_in_question(const std::string& title, const std::vector<std::string>& question_words);

// Union of the ranked sources' top-k lists, sorted by answer id.
std::vector<int> generate_candidates(const std::vector<std::vector<int>>& ranked_sources, std::size_t k = 5);
// Top-k indices of `scores`, descending, ties by ascending index.
std::vector<int> top_k(const std::vector<double>& scores, std::size_t k);

// Rank is 1 + the number of candidates ahead (higher score, or equal score and
// lower answer id); margin is the best score minus this one.
FeatureVector assemble_features(const std::vector<int>& answers, const std::vector<ScoreBundle>& bundles,
                                std::size_t index, const QuestionExtras& extras, std::size_t n_fine_types,
                                bool in_question);

struct Candidate {
  int answer = -1;
  ScoreBundle scores{};
  FeatureVector features{};
};

struct CandidateSet {
  std::string question_id;
  std::size_t n_tokens = 0;
  std::vector<Candidate> candidates;
};

// Everything needed to score a question prefix. The fine model is optional.
struct ScoringModels {
  const nqs::NQSModel* nqs = nullptr;
  const ntp::NTPModel* coarse = nullptr;
  const ntp::NTPModel* fine = nullptr;
  const ir::Collections* ir = nullptr;
  const corpus::TypeAssignment* types = nullptr;
  std::size_t top_k = 5;
};

// Candidates and features for the first `n_tokens` tokens. With
// `exclude_question_id` set the dataset collections drop that question.
CandidateSet score_question(const ScoringModels& models, const linker::AnalyzedQuestion& q, std::size_t n_tokens,
                            const std::string* exclude_question_id = nullptr);

struct StackConfig {
  nqs::NQSConfig nqs;
  ntp::NTPConfig ntp;
  gbrt::BoostConfig boost;
  int folds = 10;
  int truncations = 5;
  bool use_fine = true;
  std::size_t top_k = 5;
  unsigned threads = 1;
  const nnet::EmbeddingTable* pretrained = nullptr;
};

struct LabeledQuestion {
  const linker::AnalyzedQuestion* question = nullptr;
  int answer = -1;  // catalog id
};

struct SubModels {
  nqs::NQSModel nqs;
  ntp::NTPModel coarse;
  ntp::NTPModel fine;
  bool has_fine = false;
};

SubModels train_submodels(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                          const corpus::AnswerCatalog& catalog, const corpus::TypeAssignment& types,
                          const StackConfig& config, std::uint64_t seed);

// One record per scored truncation: which models produced the scores.
struct LeakageRecord {
  std::string question_id;
  int fold = -1;
  bool nqs_saw = false;
  bool coarse_saw = false;
  bool fine_saw = false;
  bool ir_excluded = false;  // the dataset collections dropped the question
};

struct LeakageAudit {
  std::vector<LeakageRecord> records;
  std::size_t violations() const;
};

struct TrainingSet {
  gbrt::Dataset data;
  std::vector<std::string> row_question;
  std::vector<int> row_answer;
  std::size_t questions_with_gold = 0;
  LeakageAudit audit;
};

// Stacked generalization: each fold's questions are scored by sub-models
// trained on the remaining folds; truncations per question are random.
TrainingSet build_training_set(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                               const ir::Collections& ir, const corpus::TypeAssignment& types,
                               const StackConfig& config, std::uint64_t seed);

// Rows for questions scored by fixed models without exclusion.
TrainingSet build_eval_set(const std::vector<LabeledQuestion>& questions, const ScoringModels& models,
                           int truncations, std::uint64_t seed);

void write_feature_matrix(const std::string& path, const TrainingSet& set);
gbrt::Dataset read_feature_matrix(const std::string& path);

struct RankedAnswer {
  int answer = -1;
  std::string title;
  double probability = 0.0;
};

class TrainedStack {
 public:
  TrainedStack() = default;
  TrainedStack(SubModels sub, gbrt::GBRTModel gbrt, std::size_t top_k = 5)
      : sub_(std::move(sub)), gbrt_(std::move(gbrt)), top_k_(top_k) {}

  ScoringModels models(const ir::Collections& ir, const corpus::TypeAssignment& types) const;
  std::vector<RankedAnswer> score_answers(const linker::AnalyzedQuestion& q, std::size_t n_tokens,
                                          const ir::Collections& ir, const corpus::TypeAssignment& types) const;

  const SubModels& sub() const { return sub_; }
  const gbrt::GBRTModel& gbrt() const { return gbrt_; }
  std::size_t top_k() const { return top_k_; }

  void save(const std::string& dir) const;
  static TrainedStack load(const std::string& dir);

 private:
  SubModels sub_;
  gbrt::GBRTModel gbrt_;
  std::size_t top_k_ = 5;
};

struct StackReport {
  std::size_t training_rows = 0;
  std::size_t dev_rows = 0;
  std::size_t leakage_violations = 0;
  int gbrt_rounds = 0;
};

// Training set, final sub-models on the full training split, and the GBRT.
// The stacked training rows and the dev rows are handed back when requested.
TrainedStack train_stack(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                         const ir::Collections& ir, const corpus::TypeAssignment& types, const StackConfig& config,
                         std::uint64_t seed, StackReport* report = nullptr, TrainingSet* training_rows = nullptr,
                         TrainingSet* dev_rows = nullptr);

}  // namespace qb::scorer
