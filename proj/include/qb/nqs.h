#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qb/corpus.h"
#include "qb/entity_linker.h"
#include "qb/nnet.h"

namespace qb::nqs {

struct NQSConfig {
  std::size_t dim = 300;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double dropout = 0.5;
  int max_epochs = 30;
  int patience = 3;
  // Identity-initialized projections instead of scaled uniform random.
  bool identity_projection = false;
  bool random_truncation = true;
};

// Bag of words and entities for one (possibly truncated) question.
struct QuestionInput {
  std::vector<std::string> words;     // lowercased tokens
  std::vector<std::string> entities;  // entity titles
};

QuestionInput make_input(const linker::AnalyzedQuestion& q, std::size_t n_tokens);
inline QuestionInput make_input(const linker::AnalyzedQuestion& q) { return make_input(q, q.num_tokens()); }

struct QuestionEncoding {
  std::vector<double> word_part;    // v_Dw
  std::vector<double> entity_part;  // v_De
  std::vector<double> combined;     // v_D = v_Dw + v_De
  std::size_t n_words_used = 0;
  std::size_t n_entities_used = 0;
};

struct Example {
  const linker::AnalyzedQuestion* question = nullptr;
  int answer = -1;  // catalog id
};

class NQSModel {
 public:
  NQSModel() = default;

  // Vocabularies come from the training questions; rows are copied from
  // `pretrained` when present (words by token, entities and answers by
  // ENTITY/ token), otherwise drawn from U(-0.5/d, 0.5/d).
  static NQSModel create(const std::vector<const linker::AnalyzedQuestion*>& questions,
                         const corpus::AnswerCatalog& catalog, const NQSConfig& config, std::uint64_t seed,
                         const nnet::EmbeddingTable* pretrained = nullptr);

  QuestionEncoding encode(const QuestionInput& input) const;
  std::vector<double> logits(const QuestionEncoding& enc) const;
  std::vector<double> predict(const QuestionInput& input) const;
  // (probability, logit) of one answer; throws for titles outside the catalog.
  std::pair<double, double> scores(const QuestionInput& input, const std::string& answer) const;

  // Mean cross-entropy over examples given as (word ids, entity ids, gold).
  // Gradients are accumulated into the parameters when `accumulate` is set.
  struct IndexedExample {
    std::vector<int> words;
    std::vector<int> entities;
    int answer = -1;
  };
  IndexedExample index(const QuestionInput& input, int answer) const;
  double loss(const std::vector<IndexedExample>& batch, bool accumulate);

  std::vector<nnet::Parameter*> parameters();
  nnet::Parameter& word_table() { return word_table_; }
  nnet::Parameter& entity_table() { return entity_table_; }
  nnet::Parameter& answer_table() { return answer_table_; }
  const nnet::Parameter& answer_table() const { return answer_table_; }
  nnet::Parameter& word_projection() { return proj_word_; }
  nnet::Parameter& entity_projection() { return proj_entity_; }

  const corpus::AnswerCatalog& catalog() const { return catalog_; }
  std::size_t dim() const { return dim_; }
  int word_id(const std::string& w) const;
  int entity_id(const std::string& title) const;

  // Question ids this model was trained on (stacking audit).
  const std::vector<std::string>& trained_on() const { return trained_on_; }
  void set_trained_on(std::vector<std::string> ids) { trained_on_ = std::move(ids); }

  void save(const std::string& dir, const std::string& stem) const;
  static NQSModel load(const std::string& dir, const std::string& stem);

 private:
  void build_index();

  std::size_t dim_ = 0;
  corpus::AnswerCatalog catalog_;
  std::vector<std::string> words_;
  std::vector<std::string> entities_;
  std::unordered_map<std::string, int> word_index_;
  std::unordered_map<std::string, int> entity_index_;
  nnet::Parameter word_table_;
  nnet::Parameter entity_table_;
  nnet::Parameter answer_table_;
  nnet::Parameter proj_word_;
  nnet::Parameter proj_entity_;
  std::vector<std::string> trained_on_;
};

struct TrainReport {
  int epochs = 0;
  int best_epoch = 0;
  double best_dev_accuracy = 0.0;
  double final_train_accuracy = 0.0;
};

// Minibatch Adam on categorical cross-entropy with random truncation and
// word/entity dropout; early stopping on dev accuracy. Answer vectors stay
// fixed. Deterministic for a given seed.
NQSModel train_nqs(const std::vector<Example>& train, const std::vector<Example>& dev,
                   const corpus::AnswerCatalog& catalog, const NQSConfig& config, std::uint64_t seed,
                   const nnet::EmbeddingTable* pretrained = nullptr, TrainReport* report = nullptr);

double accuracy(const NQSModel& model, const std::vector<Example>& examples);

// Finite-difference check of the analytic gradients on a random toy problem.
nnet::GradCheckResult check_gradients(std::uint64_t seed, std::size_t dim = 8);

}  // namespace qb::nqs
