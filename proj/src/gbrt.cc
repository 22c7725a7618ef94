#include "qb/gbrt.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "qb/error.h"
#include "qb/nnet.h"

namespace qb::gbrt {

using nlohmann::json;

void Dataset::append(std::span<const float> features, float label) {
  if (rows == 0 && cols == 0) cols = features.size();
  if (features.size() != cols) throw Error("feature row has the wrong length");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
  ++rows;
}

void BoostConfig::validate() const {
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
  if (max_leaves < 2) throw Error("max_leaves must be at least 2");
  if (min_leaf_samples < 1) throw Error("min_leaf_samples must be at least 1");
  if (l2_lambda < 0) throw Error("l2_lambda must be non-negative");
  if (max_rounds < 0 || early_stop_rounds < 1) throw Error("invalid round limits");
}

std::size_t RegressionTree::num_leaves() const {
  return static_cast<std::size_t>(std::count_if(feature.begin(), feature.end(), [](int f) { return f < 0; }));
}

int RegressionTree::leaf_of(const float* x) const {
  int n = 0;
  while (feature[static_cast<std::size_t>(n)] >= 0) {
    auto k = static_cast<std::size_t>(n);
    n = static_cast<double>(x[feature[k]]) <= threshold[k] ? left[k] : right[k];
  }
  return n;
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  double g = gl + gr, h = hl + hr;
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
}

double leaf_value(double g, double h, double lambda) { return -g / (h + lambda); }

namespace {

// Per-feature row orders sorted by value; a leaf owns the same contiguous
// range in every feature's array.
struct SortedColumns {
  std::vector<int> features;
  std::vector<std::vector<std::uint32_t>> order;

  SortedColumns(const Dataset& data, const BoostConfig& config) {
    for (std::size_t f = 0; f < data.cols; ++f)
      if (config.feature_mask.empty() || (f < config.feature_mask.size() && config.feature_mask[f]))
        features.push_back(static_cast<int>(f));
    order.resize(features.size());
    for (std::size_t k = 0; k < features.size(); ++k) {
      auto f = static_cast<std::size_t>(features[k]);
      auto& o = order[k];
      o.resize(data.rows);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return data.at(a, f) < data.at(b, f); });
    }
  }
};

struct LeafState {
  int node = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double g = 0.0;
  double h = 0.0;
  SplitCandidate best;
};

void search_leaf(const Dataset& data, const SortedColumns& cols, std::span<const double> grad,
                 std::span<const double> hess, const BoostConfig& config, LeafState& leaf) {
  leaf.best = SplitCandidate{};
  std::size_t n = leaf.end - leaf.begin;
  auto min_leaf = static_cast<std::size_t>(config.min_leaf_samples);
  if (n < 2 * min_leaf) return;
  double lambda = config.l2_lambda;
  for (std::size_t k = 0; k < cols.features.size(); ++k) {
    auto f = static_cast<std::size_t>(cols.features[k]);
    const auto& o = cols.order[k];
    double gl = 0.0, hl = 0.0;
    for (std::size_t i = leaf.begin; i + 1 < leaf.end; ++i) {
      std::uint32_t r = o[i];
      gl += grad[r];
      hl += hess[r];
      std::size_t nl = i + 1 - leaf.begin;
      if (nl < min_leaf) continue;
      if (n - nl < min_leaf) break;
      float a = data.at(r, f), b = data.at(o[i + 1], f);
      if (!(a < b)) continue;
      double gain = split_gain(gl, hl, leaf.g - gl, leaf.h - hl, lambda);
      if (gain > leaf.best.gain) {
        double thr = 0.5 * (static_cast<double>(a) + static_cast<double>(b));
        // The midpoint of adjacent floats can round onto b; keep a strictly left.
        if (!(thr < static_cast<double>(b))) thr = static_cast<double>(a);
        leaf.best = SplitCandidate{static_cast<int>(f), thr, gain, nl};
      }
    }
  }
}

int add_node(RegressionTree& t, double value) {
  t.feature.push_back(-1);
  t.threshold.push_back(0.0);
  t.left.push_back(-1);
  t.right.push_back(-1);
  t.value.push_back(value);
  return static_cast<int>(t.feature.size()) - 1;
}

RegressionTree grow(const Dataset& data, const SortedColumns& base, std::span<const double> grad,
                    std::span<const double> hess, const BoostConfig& config) {
  if (grad.size() != data.rows || hess.size() != data.rows) throw Error("gradient length does not match rows");
  SortedColumns cols = base;
  RegressionTree tree;
  LeafState root;
  root.end = data.rows;
  for (std::size_t i = 0; i < data.rows; ++i) {
    root.g += grad[i];
    root.h += hess[i];
  }
  root.node = add_node(tree, leaf_value(root.g, root.h, config.l2_lambda));
  search_leaf(data, cols, grad, hess, config, root);

  std::vector<LeafState> leaves{root};
  std::vector<char> goes_left(data.rows, 0);
  std::vector<std::uint32_t> buffer;
  while (leaves.size() < static_cast<std::size_t>(config.max_leaves)) {
    std::size_t pick = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i].best.feature < 0 || !(leaves[i].best.gain > 0)) continue;
      if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
    }
    if (pick == leaves.size()) break;

    LeafState parent = leaves[pick];
    const auto& s = parent.best;
    auto sf = static_cast<std::size_t>(s.feature);
    for (std::size_t k = 0; k < cols.features.size(); ++k) {
      auto& o = cols.order[k];
      if (k == 0)
        for (std::size_t i = parent.begin; i < parent.end; ++i)
          goes_left[o[i]] = static_cast<double>(data.at(o[i], sf)) <= s.threshold;
      buffer.clear();
      std::size_t w = parent.begin;
      for (std::size_t i = parent.begin; i < parent.end; ++i) {
        if (goes_left[o[i]])
          o[w++] = o[i];
        else
          buffer.push_back(o[i]);
      }
      std::copy(buffer.begin(), buffer.end(), o.begin() + static_cast<std::ptrdiff_t>(w));
    }

    LeafState l, r;
    l.begin = parent.begin;
    l.end = parent.begin + s.n_left;
    r.begin = l.end;
    r.end = parent.end;
    const auto& o0 = cols.order[0];
    for (std::size_t i = l.begin; i < l.end; ++i) {
      l.g += grad[o0[i]];
      l.h += hess[o0[i]];
    }
    r.g = parent.g - l.g;
    r.h = parent.h - l.h;
    l.node = add_node(tree, leaf_value(l.g, l.h, config.l2_lambda));
    r.node = add_node(tree, leaf_value(r.g, r.h, config.l2_lambda));
    auto pn = static_cast<std::size_t>(parent.node);
    tree.feature[pn] = s.feature;
    tree.threshold[pn] = s.threshold;
    tree.left[pn] = l.node;
    tree.right[pn] = r.node;
    search_leaf(data, cols, grad, hess, config, l);
    search_leaf(data, cols, grad, hess, config, r);
    leaves[pick] = l;
    leaves.push_back(r);
  }
  return tree;
}

double logit_of_rate(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

SplitCandidate best_root_split(const Dataset& data, std::span<const double> grad, std::span<const double> hess,
                               const BoostConfig& config) {
  SortedColumns cols(data, config);
  LeafState root;
  root.end = data.rows;
  for (std::size_t i = 0; i < data.rows; ++i) {
    root.g += grad[i];
    root.h += hess[i];
  }
  search_leaf(data, cols, grad, hess, config, root);
  return root.best;
}

RegressionTree fit_tree(const Dataset& data, std::span<const double> grad, std::span<const double> hess,
                        const BoostConfig& config) {
  config.validate();
  return grow(data, SortedColumns(data, config), grad, hess, config);
}

double GBRTModel::raw_score(std::span<const float> x) const {
  if (x.size() != num_features_)
    throw Error("feature vector has length " + std::to_string(x.size()) + ", model expects " +
                std::to_string(num_features_));
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x.data());
  return base_score_ + learning_rate_ * s;
}

double GBRTModel::predict_proba(std::span<const float> x) const { return nnet::sigmoid(raw_score(x)); }

std::vector<double> GBRTModel::predict_proba(const Dataset& data) const {
  std::vector<double> out(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) out[i] = predict_proba(std::span<const float>(data.row(i), data.cols));
  return out;
}

std::string GBRTModel::to_json() const {
  json j;
  j["format"] = "qb-gbrt";
  j["v"] = 1;
  j["base_score"] = base_score_;
  j["learning_rate"] = learning_rate_;
  j["num_features"] = num_features_;
  j["feature_names"] = feature_names_;
  json trees = json::array();
  for (const auto& t : trees_)
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"value", t.value}});
  j["trees"] = std::move(trees);
  return j.dump();
}

GBRTModel GBRTModel::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
  if (j.value("format", "") != "qb-gbrt" || j.value("v", 0) != 1) throw Error("unsupported model format");
  try {
    GBRTModel m(j.at("base_score").get<double>(), j.at("learning_rate").get<double>(),
                j.at("num_features").get<std::size_t>());
    m.feature_names_ = j.value("feature_names", std::vector<std::string>{});
    for (const auto& jt : j.at("trees")) {
      RegressionTree t;
      jt.at("feature").get_to(t.feature);
      jt.at("threshold").get_to(t.threshold);
      jt.at("left").get_to(t.left);
      jt.at("right").get_to(t.right);
      jt.at("value").get_to(t.value);
      std::size_t n = t.feature.size();
      if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n)
        throw Error("tree arrays have inconsistent lengths");
      for (std::size_t k = 0; k < n; ++k) {
        if (t.feature[k] < 0) continue;
        if (static_cast<std::size_t>(t.feature[k]) >= m.num_features_) throw Error("tree feature out of range");
        for (int c : {t.left[k], t.right[k]})
          if (c <= static_cast<int>(k) || static_cast<std::size_t>(c) >= n) throw Error("tree child out of range");
      }
      m.trees_.push_back(std::move(t));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model file: ") + e.what());
  }
}

void GBRTModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json() << '\n';
}

GBRTModel GBRTModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double logloss(std::span<const float> labels, std::span<const double> probabilities) {
  if (labels.empty()) return 0.0;
  constexpr double eps = 1e-15;
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double p = std::clamp(probabilities[i], eps, 1.0 - eps);
    s -= labels[i] > 0.5f ? std::log(p) : std::log(1.0 - p);
  }
  return s / static_cast<double>(labels.size());
}

double auc(std::span<const float> labels, std::span<const double> scores) {
  std::vector<std::size_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] > 0.5f) {
        pos += 1;
        rank_sum += avg_rank;
      } else {
        neg += 1;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) return 0.5;
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

GBRTModel train(const Dataset& train, const Dataset& dev, const BoostConfig& config, TrainLog* log) {
  config.validate();
  if (train.rows == 0) throw Error("empty training set");
  if (dev.rows > 0 && dev.cols != train.cols) throw Error("dev features do not match training features");
  double positives = 0;
  for (float v : train.y) positives += v > 0.5f ? 1.0 : 0.0;
  if (positives == 0 || positives == static_cast<double>(train.rows))
    throw Error("training labels contain a single class");

  GBRTModel model(logit_of_rate(positives / static_cast<double>(train.rows)), config.learning_rate, train.cols);
  SortedColumns cols(train, config);
  std::vector<double> f_train(train.rows, model.base_score()), f_dev(dev.rows, model.base_score());
  std::vector<double> grad(train.rows), hess(train.rows), p_train(train.rows), p_dev(dev.rows);

  auto losses = [&](double& lt, double& ld) {
    for (std::size_t i = 0; i < train.rows; ++i) p_train[i] = nnet::sigmoid(f_train[i]);
    for (std::size_t i = 0; i < dev.rows; ++i) p_dev[i] = nnet::sigmoid(f_dev[i]);
    lt = logloss(train.y, p_train);
    ld = dev.rows > 0 ? logloss(dev.y, p_dev) : lt;
  };

  TrainLog local;
  TrainLog& lg = log ? *log : local;
  lg = TrainLog{};
  double lt = 0, ld = 0;
  losses(lt, ld);
  lg.train_logloss.push_back(lt);
  lg.dev_logloss.push_back(ld);
  double best = ld;
  int best_rounds = 0;

  for (int round = 1; round <= config.max_rounds; ++round) {
    for (std::size_t i = 0; i < train.rows; ++i) {
      grad[i] = p_train[i] - train.y[i];
      hess[i] = p_train[i] * (1.0 - p_train[i]);
    }
    RegressionTree tree = grow(train, cols, grad, hess, config);
    for (std::size_t i = 0; i < train.rows; ++i) f_train[i] += config.learning_rate * tree.predict(train.row(i));
    for (std::size_t i = 0; i < dev.rows; ++i) f_dev[i] += config.learning_rate * tree.predict(dev.row(i));
    model.add_tree(std::move(tree));
    losses(lt, ld);
    lg.train_logloss.push_back(lt);
    lg.dev_logloss.push_back(ld);
    if (ld < best) {
      best = ld;
      best_rounds = round;
    } else if (round - best_rounds >= config.early_stop_rounds) {
      break;
    }
  }
  model.truncate(static_cast<std::size_t>(best_rounds));
  lg.best_rounds = best_rounds;
  return model;
}

}  // namespace qb::gbrt
