#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qb/corpus.h"
#include "qb/entity_linker.h"
#include "qb/nnet.h"

namespace qb::ntp {

enum class Mode { kCoarse, kFine };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct NTPConfig {
  std::size_t d_word = 300;
  std::size_t d_conv = 1000;
  std::vector<std::size_t> windows = {2, 3, 4, 5};
  double learning_rate = 2e-3;
  std::size_t batch_size = 32;
  int max_epochs = 30;
  int patience = 3;
  bool random_truncation = true;
};

struct TypePrediction {
  Mode mode = Mode::kCoarse;
  std::vector<double> probabilities;  // indexed like NTPModel::type_names()
};

// Intermediate values of one forward pass, kept for backprop.
struct ConvTrace {
  std::vector<int> words;
  std::vector<double> z;
  // Per window size: argmax window index per feature map (-1 when the only
  // window is the all-padding one) and its pre-activation.
  std::vector<std::vector<int>> argmax;
  std::vector<std::vector<double>> pre_at_max;
};

struct TypedExample {
  const linker::AnalyzedQuestion* question = nullptr;
  std::vector<int> labels;  // one index (coarse) or the gold set (fine)
};

class NTPModel {
 public:
  NTPModel() = default;

  static NTPModel create(const std::vector<const linker::AnalyzedQuestion*>& questions,
                         std::vector<std::string> type_names, Mode mode, const NTPConfig& config,
                         std::uint64_t seed, const nnet::EmbeddingTable* pretrained = nullptr);

  std::vector<int> word_ids(const std::vector<std::string>& words) const;  // OOV skipped

  // Wide convolution + relu + max-over-time pooling for each window size,
  // concatenated in ascending window order.
  ConvTrace conv_features(const std::vector<int>& words) const;
  std::vector<double> logits(const std::vector<double>& z) const;
  TypePrediction predict_types(const std::vector<std::string>& words) const;

  struct IndexedExample {
    std::vector<int> words;
    std::vector<int> labels;
  };
  double loss(const std::vector<IndexedExample>& batch, bool accumulate);

  std::vector<nnet::Parameter*> parameters();
  nnet::Parameter& word_table() { return word_table_; }
  nnet::Parameter& conv_weight(std::size_t k) { return conv_w_[k]; }
  nnet::Parameter& conv_bias(std::size_t k) { return conv_b_[k]; }
  nnet::Parameter& head_weight() { return head_w_; }
  nnet::Parameter& head_bias() { return head_b_; }

  Mode mode() const { return mode_; }
  const std::vector<std::string>& type_names() const { return type_names_; }
  int type_index(const std::string& name) const;
  const std::vector<std::size_t>& windows() const { return windows_; }
  std::size_t d_word() const { return d_word_; }
  std::size_t d_conv() const { return d_conv_; }
  std::size_t feature_dim() const { return windows_.size() * d_conv_; }

  const std::vector<std::string>& trained_on() const { return trained_on_; }
  void set_trained_on(std::vector<std::string> ids) { trained_on_ = std::move(ids); }

  void save(const std::string& dir, const std::string& stem) const;
  static NTPModel load(const std::string& dir, const std::string& stem);

 private:
  void build_index();

  Mode mode_ = Mode::kCoarse;
  std::size_t d_word_ = 0;
  std::size_t d_conv_ = 0;
  std::vector<std::size_t> windows_;
  std::vector<std::string> type_names_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_index_;
  nnet::Parameter word_table_;
  std::vector<nnet::Parameter> conv_w_;  // d_conv x (h * d_word)
  std::vector<nnet::Parameter> conv_b_;  // d_conv x 1
  nnet::Parameter head_w_;               // |T| x (|H| * d_conv)
  nnet::Parameter head_b_;               // |T| x 1
  std::vector<std::string> trained_on_;
};

struct TypeTrainReport {
  int epochs = 0;
  int best_epoch = 0;
  double best_dev_metric = 0.0;
};

// Coarse: categorical cross-entropy on one label. Fine: binary cross-entropy
// averaged over all types. Adamax, random truncation, early stopping on dev
// accuracy (coarse) or micro-F1 (fine).
NTPModel train_ntp(const std::vector<TypedExample>& train, const std::vector<TypedExample>& dev,
                   std::vector<std::string> type_names, Mode mode, const NTPConfig& config, std::uint64_t seed,
                   const nnet::EmbeddingTable* pretrained = nullptr, TypeTrainReport* report = nullptr);

// Sum and max of the predicted probabilities over the given type indices.
std::pair<double, double> ntp_answer_scores(const TypePrediction& pred, const std::vector<int>& answer_types);

struct TypeMetrics {
  double accuracy = 0.0;        // coarse: argmax == gold; fine: exact set match at 0.5
  double precision_at_1 = 0.0;  // fine only
  double micro_f1 = 0.0;        // fine only
};
TypeMetrics evaluate_types(const NTPModel& model, const std::vector<TypedExample>& examples,
                           std::size_t n_tokens_limit = static_cast<std::size_t>(-1));

// Builds labelled examples from questions and the answer type assignment;
// questions whose answers carry no types are skipped.
std::vector<TypedExample> make_typed_examples(const std::vector<const linker::AnalyzedQuestion*>& questions,
                                              const std::vector<std::string>& answers,
                                              const corpus::TypeAssignment& types, Mode mode,
                                              const corpus::TypeSystem& system = corpus::TypeSystem::defaults());
std::vector<std::string> type_names_for(Mode mode, const corpus::TypeSystem& system = corpus::TypeSystem::defaults());
// Indices of an answer's types in the model's inventory.
std::vector<int> answer_type_indices(const NTPModel& model, const corpus::TypeEntry& entry);

nnet::GradCheckResult check_gradients(Mode mode, std::uint64_t seed, std::size_t d_word = 4, std::size_t d_conv = 3,
                                      std::size_t n_types = 3);

}  // namespace qb::ntp
