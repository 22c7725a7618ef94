#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qb::gbrt {

// Dense row-major feature matrix with optional binary labels.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> x;
  std::vector<float> y;

  Dataset() = default;
  Dataset(std::size_t r, std::size_t c) : rows(r), cols(c), x(r * c, 0.0f), y(r, 0.0f) {}

  const float* row(std::size_t i) const { return x.data() + i * cols; }
  float* row(std::size_t i) { return x.data() + i * cols; }
  float& at(std::size_t i, std::size_t j) { return x[i * cols + j]; }
  float at(std::size_t i, std::size_t j) const { return x[i * cols + j]; }
  void append(std::span<const float> features, float label);
};

struct BoostConfig {
  double learning_rate = 0.02;
  int max_leaves = 400;
  int min_leaf_samples = 20;
  double l2_lambda = 1.0;
  int max_rounds = 5000;
  int early_stop_rounds = 100;
  // Features with a zero entry are never split on; empty allows all.
  std::vector<char> feature_mask;

  void validate() const;
};

// Flat node arrays; node 0 is the root, feature < 0 marks a leaf.
struct RegressionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  std::size_t num_nodes() const { return feature.size(); }
  std::size_t num_leaves() const;
  int leaf_of(const float* x) const;  // x <= threshold goes left
  double predict(const float* x) const { return value[static_cast<std::size_t>(leaf_of(x))]; }
  bool operator==(const RegressionTree&) const = default;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t n_left = 0;
};

double split_gain(double gl, double hl, double gr, double hr, double lambda);
double leaf_value(double g, double h, double lambda);

// Best split over all rows by exact sorted-threshold search; feature = -1 when
// no admissible split has positive gain. Ties keep the lowest feature, then the
// lowest threshold.
SplitCandidate best_root_split(const Dataset& data, std::span<const double> grad, std::span<const double> hess,
                               const BoostConfig& config);

// Best-first leaf-wise growth up to max_leaves.
RegressionTree fit_tree(const Dataset& data, std::span<const double> grad, std::span<const double> hess,
                        const BoostConfig& config);

class GBRTModel {
 public:
  GBRTModel() = default;
  GBRTModel(double base_score, double learning_rate, std::size_t num_features)
      : base_score_(base_score), learning_rate_(learning_rate), num_features_(num_features) {}

  double raw_score(std::span<const float> x) const;
  double predict_proba(std::span<const float> x) const;
  std::vector<double> predict_proba(const Dataset& data) const;

  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  std::size_t num_features() const { return num_features_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  void add_tree(RegressionTree t) { trees_.push_back(std::move(t)); }
  void truncate(std::size_t n_trees) { if (n_trees < trees_.size()) trees_.resize(n_trees); }

  std::vector<std::string>& feature_names() { return feature_names_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  // JSON manifest with flat per-tree node arrays.
  void save(const std::string& path) const;
  static GBRTModel load(const std::string& path);
  std::string to_json() const;
  static GBRTModel from_json(const std::string& text);

 private:
  double base_score_ = 0.0;
  double learning_rate_ = 0.02;
  std::size_t num_features_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<std::string> feature_names_;
};

struct TrainLog {
  std::vector<double> train_logloss;  // after each round; entry 0 is the base model
  std::vector<double> dev_logloss;
  int best_rounds = 0;
};

// Logistic-loss boosting; early stopping on dev logloss (training logloss when
// dev is empty). Keeps the trees up to the best round.
GBRTModel train(const Dataset& train, const Dataset& dev, const BoostConfig& config, TrainLog* log = nullptr);

double logloss(std::span<const float> labels, std::span<const double> probabilities);
// Area under the ROC curve with tied scores averaged.
double auc(std::span<const float> labels, std::span<const double> scores);

}  // namespace qb::gbrt
