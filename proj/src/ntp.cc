#include "qb/ntp.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>

#include "qb/error.h"

namespace qb::ntp {

std::string to_string(Mode mode) { return mode == Mode::kCoarse ? "coarse" : "fine"; }

Mode mode_from_string(const std::string& s) {
  if (s == "coarse") return Mode::kCoarse;
  if (s == "fine") return Mode::kFine;
  throw Error("unknown type granularity: " + s);
}

NTPModel NTPModel::create(const std::vector<const linker::AnalyzedQuestion*>& questions,
                          std::vector<std::string> type_names, Mode mode, const NTPConfig& config,
                          std::uint64_t seed, const nnet::EmbeddingTable* pretrained) {
  if (config.windows.empty() || config.d_word == 0 || config.d_conv == 0) throw Error("invalid NTP dimensions");
  if (type_names.empty()) throw Error("NTP needs at least one type");
  std::set<std::string> words;
  for (const auto* q : questions) {
    for (const auto& t : q->tt.tokens) words.insert(t.lower);
  }
  NTPModel m;
  m.mode_ = mode;
  m.d_word_ = config.d_word;
  m.d_conv_ = config.d_conv;
  m.windows_ = config.windows;
  std::sort(m.windows_.begin(), m.windows_.end());
  m.type_names_ = std::move(type_names);
  m.words_.assign(words.begin(), words.end());
  m.build_index();

  std::mt19937_64 rng(seed);
  m.word_table_ = nnet::Parameter("word_table", m.words_.size(), m.d_word_);
  m.word_table_.value.fill_uniform(-0.25f, 0.25f, rng);
  for (std::size_t h : m.windows_) {
    const std::size_t fan_in = h * m.d_word_;
    const auto bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    nnet::Parameter w("conv_w" + std::to_string(h), m.d_conv_, fan_in);
    nnet::Parameter b("conv_b" + std::to_string(h), m.d_conv_, 1);
    w.value.fill_uniform(-bound, bound, rng);
    b.value.fill_uniform(-bound, bound, rng);
    m.conv_w_.push_back(std::move(w));
    m.conv_b_.push_back(std::move(b));
  }
  const auto hb = static_cast<float>(1.0 / std::sqrt(static_cast<double>(m.feature_dim())));
  m.head_w_ = nnet::Parameter("head_w", m.type_names_.size(), m.feature_dim());
  m.head_b_ = nnet::Parameter("head_b", m.type_names_.size(), 1);
  m.head_w_.value.fill_uniform(-hb, hb, rng);
  m.head_b_.value.fill_uniform(-hb, hb, rng);

  if (pretrained != nullptr) {
    if (pretrained->dim() != m.d_word_) throw Error("pretrained word dim does not match d_word");
    for (std::size_t i = 0; i < m.words_.size(); ++i) {
      int src = pretrained->index(m.words_[i]);
      if (src < 0) continue;
      auto from = pretrained->table().row(static_cast<std::size_t>(src));
      std::copy(from.begin(), from.end(), m.word_table_.value.row(i).begin());
    }
  }
  return m;
}

void NTPModel::build_index() {
  word_index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) word_index_.emplace(words_[i], static_cast<int>(i));
}

int NTPModel::type_index(const std::string& name) const {
  auto it = std::find(type_names_.begin(), type_names_.end(), name);
  return it == type_names_.end() ? -1 : static_cast<int>(it - type_names_.begin());
}

std::vector<int> NTPModel::word_ids(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) {
    auto it = word_index_.find(w);
    if (it != word_index_.end()) ids.push_back(it->second);
  }
  return ids;
}

std::vector<nnet::Parameter*> NTPModel::parameters() {
  std::vector<nnet::Parameter*> out = {&word_table_};
  for (std::size_t k = 0; k < windows_.size(); ++k) {
    out.push_back(&conv_w_[k]);
    out.push_back(&conv_b_[k]);
  }
  out.push_back(&head_w_);
  out.push_back(&head_b_);
  return out;
}

ConvTrace NTPModel::conv_features(const std::vector<int>& words) const {
  ConvTrace trace;
  trace.words = words;
  trace.z.assign(feature_dim(), 0.0);
  const auto n = static_cast<long>(words.size());
  std::vector<const float*> x(words.size());
  for (std::size_t p = 0; p < words.size(); ++p) {
    x[p] = word_table_.value.row(static_cast<std::size_t>(words[p])).data();
  }

  for (std::size_t k = 0; k < windows_.size(); ++k) {
    const auto h = static_cast<long>(windows_[k]);
    const nnet::Matrix& w = conv_w_[k].value;
    const nnet::Matrix& b = conv_b_[k].value;
    std::vector<int> arg(d_conv_, -1);
    std::vector<double> best(d_conv_);
    for (std::size_t j = 0; j < d_conv_; ++j) best[j] = b(j, 0);  // the all-padding window

    if (n > 0) {
      const long m = n + h - 1;
      for (long i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d_conv_; ++j) {
          auto wrow = w.row(j);
          double acc = b(j, 0);
          for (long off = 0; off < h; ++off) {
            const long pos = i - (h - 1) + off;
            if (pos < 0 || pos >= n) continue;
            const float* xp = x[static_cast<std::size_t>(pos)];
            const float* wp = wrow.data() + off * static_cast<long>(d_word_);
            for (std::size_t t = 0; t < d_word_; ++t) acc += static_cast<double>(wp[t]) * xp[t];
          }
          if (i == 0 || acc > best[j]) {
            best[j] = acc;
            arg[j] = static_cast<int>(i);
          }
        }
      }
    }
    for (std::size_t j = 0; j < d_conv_; ++j) trace.z[k * d_conv_ + j] = nnet::relu(best[j]);
    trace.argmax.push_back(std::move(arg));
    trace.pre_at_max.push_back(std::move(best));
  }
  return trace;
}

std::vector<double> NTPModel::logits(const std::vector<double>& z) const {
  std::vector<double> out(type_names_.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    auto wrow = head_w_.value.row(t);
    double acc = head_b_.value(t, 0);
    for (std::size_t i = 0; i < z.size(); ++i) acc += wrow[i] * z[i];
    out[t] = acc;
  }
  return out;
}

TypePrediction NTPModel::predict_types(const std::vector<std::string>& words) const {
  auto z = logits(conv_features(word_ids(words)).z);
  TypePrediction pred;
  pred.mode = mode_;
  if (mode_ == Mode::kCoarse) {
    pred.probabilities = nnet::softmax(z);
  } else {
    pred.probabilities.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) pred.probabilities[i] = nnet::sigmoid(z[i]);
  }
  return pred;
}

double NTPModel::loss(const std::vector<IndexedExample>& batch, bool accumulate) {
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  const std::size_t n_types = type_names_.size();
  double total = 0.0;

  for (const auto& ex : batch) {
    ConvTrace trace = conv_features(ex.words);
    auto z = logits(trace.z);
    std::vector<double> dlogit(n_types, 0.0);
    if (mode_ == Mode::kCoarse) {
      auto p = nnet::softmax(z);
      const auto gold = static_cast<std::size_t>(ex.labels.at(0));
      total += -std::log(std::max(p[gold], 1e-300));
      for (std::size_t t = 0; t < n_types; ++t) dlogit[t] = p[t] - (t == gold ? 1.0 : 0.0);
    } else {
      std::vector<double> y(n_types, 0.0);
      for (int l : ex.labels) y[static_cast<std::size_t>(l)] = 1.0;
      double l = 0.0;
      for (std::size_t t = 0; t < n_types; ++t) {
        l -= y[t] * nnet::log_sigmoid(z[t]) + (1.0 - y[t]) * nnet::log_sigmoid(-z[t]);
        dlogit[t] = (nnet::sigmoid(z[t]) - y[t]) / static_cast<double>(n_types);
      }
      total += l / static_cast<double>(n_types);
    }
    if (!accumulate) continue;

    std::vector<double> dz(feature_dim(), 0.0);
    for (std::size_t t = 0; t < n_types; ++t) {
      const double g = dlogit[t] * scale;
      if (g == 0.0) continue;
      auto wrow = head_w_.value.row(t);
      auto grow = head_w_.grad.row(t);
      for (std::size_t i = 0; i < dz.size(); ++i) {
        grow[i] += static_cast<float>(g * trace.z[i]);
        dz[i] += g * wrow[i];
      }
      head_b_.grad(t, 0) += static_cast<float>(g);
    }

    const auto n = static_cast<long>(ex.words.size());
    for (std::size_t k = 0; k < windows_.size(); ++k) {
      const auto h = static_cast<long>(windows_[k]);
      nnet::Parameter& w = conv_w_[k];
      nnet::Parameter& b = conv_b_[k];
      for (std::size_t j = 0; j < d_conv_; ++j) {
        const double g = dz[k * d_conv_ + j];
        if (g == 0.0 || trace.pre_at_max[k][j] <= 0.0) continue;  // relu gate
        b.grad(j, 0) += static_cast<float>(g);
        const int i = trace.argmax[k][j];
        if (i < 0) continue;
        auto wrow = w.value.row(j);
        auto gw = w.grad.row(j);
        for (long off = 0; off < h; ++off) {
          const long pos = i - (h - 1) + off;
          if (pos < 0 || pos >= n) continue;
          const auto word = static_cast<std::size_t>(ex.words[static_cast<std::size_t>(pos)]);
          auto xrow = word_table_.value.row(word);
          auto gx = word_table_.grad.row(word);
          const std::size_t base = static_cast<std::size_t>(off) * d_word_;
          for (std::size_t t = 0; t < d_word_; ++t) {
            gw[base + t] += static_cast<float>(g * xrow[t]);
            gx[t] += static_cast<float>(g * wrow[base + t]);
          }
        }
      }
    }
  }
  return total * scale;
}

void NTPModel::save(const std::string& dir, const std::string& stem) const {
  nlohmann::json meta = {{"model", "ntp"},
                         {"mode", to_string(mode_)},
                         {"d_word", d_word_},
                         {"d_conv", d_conv_},
                         {"windows", windows_},
                         {"types_hash", nnet::vocabulary_hash(type_names_)},
                         {"words_hash", nnet::vocabulary_hash(words_)}};
  std::vector<std::pair<std::string, const nnet::Matrix*>> tensors = {{"word_table", &word_table_.value}};
  for (std::size_t k = 0; k < windows_.size(); ++k) {
    tensors.emplace_back(conv_w_[k].name, &conv_w_[k].value);
    tensors.emplace_back(conv_b_[k].name, &conv_b_[k].value);
  }
  tensors.emplace_back("head_w", &head_w_.value);
  tensors.emplace_back("head_b", &head_b_.value);
  nnet::save_tensors(dir, stem, meta, tensors);
  nnet::write_lines(dir + "/" + stem + ".words.txt", words_);
  nnet::write_lines(dir + "/" + stem + ".types.txt", type_names_);
  nnet::write_lines(dir + "/" + stem + ".trained_on.txt", trained_on_);
}

NTPModel NTPModel::load(const std::string& dir, const std::string& stem) {
  auto loaded = nnet::load_tensors(dir, stem);
  if (loaded.meta.value("model", "") != "ntp") throw Error("not an NTP model: " + stem);
  NTPModel m;
  m.mode_ = mode_from_string(loaded.meta["mode"].get<std::string>());
  m.d_word_ = loaded.meta["d_word"].get<std::size_t>();
  m.d_conv_ = loaded.meta["d_conv"].get<std::size_t>();
  m.windows_ = loaded.meta["windows"].get<std::vector<std::size_t>>();
  m.words_ = nnet::read_lines(dir + "/" + stem + ".words.txt");
  m.type_names_ = nnet::read_lines(dir + "/" + stem + ".types.txt");
  if (nnet::vocabulary_hash(m.words_) != loaded.meta["words_hash"].get<std::uint64_t>() ||
      nnet::vocabulary_hash(m.type_names_) != loaded.meta["types_hash"].get<std::uint64_t>()) {
    throw Error("NTP vocabulary files do not match manifest");
  }
  if (std::filesystem::exists(dir + "/" + stem + ".trained_on.txt")) {
    m.trained_on_ = nnet::read_lines(dir + "/" + stem + ".trained_on.txt");
  }
  m.build_index();
  auto take = [&](const std::string& name) {
    nnet::Parameter p;
    p.name = name;
    p.value = std::move(loaded.tensors.at(name));
    p.grad = nnet::Matrix(p.value.rows(), p.value.cols());
    return p;
  };
  m.word_table_ = take("word_table");
  for (std::size_t h : m.windows_) {
    m.conv_w_.push_back(take("conv_w" + std::to_string(h)));
    m.conv_b_.push_back(take("conv_b" + std::to_string(h)));
  }
  m.head_w_ = take("head_w");
  m.head_b_ = take("head_b");
  return m;
}

std::pair<double, double> ntp_answer_scores(const TypePrediction& pred, const std::vector<int>& answer_types) {
  if (answer_types.empty()) return {0.0, 0.0};
  double sum = 0.0;
  double mx = 0.0;
  for (int t : answer_types) {
    const double p = pred.probabilities.at(static_cast<std::size_t>(t));
    sum += p;
    mx = std::max(mx, p);
  }
  return {sum, mx};
}

TypeMetrics evaluate_types(const NTPModel& model, const std::vector<TypedExample>& examples,
                           std::size_t n_tokens_limit) {
  TypeMetrics m;
  if (examples.empty()) return m;
  std::size_t exact = 0, p1 = 0, tp = 0, fp = 0, fn = 0;
  for (const auto& ex : examples) {
    auto pred = model.predict_types(ex.question->words(n_tokens_limit));
    const auto& p = pred.probabilities;
    const auto top = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    const bool top_gold = std::find(ex.labels.begin(), ex.labels.end(), top) != ex.labels.end();
    if (model.mode() == Mode::kCoarse) {
      if (top_gold) ++exact;
      continue;
    }
    if (top_gold) ++p1;
    bool all_right = true;
    for (std::size_t t = 0; t < p.size(); ++t) {
      const bool predicted = p[t] > 0.5;
      const bool gold = std::find(ex.labels.begin(), ex.labels.end(), static_cast<int>(t)) != ex.labels.end();
      if (predicted && gold) ++tp;
      if (predicted && !gold) ++fp;
      if (!predicted && gold) ++fn;
      if (predicted != gold) all_right = false;
    }
    if (all_right) ++exact;
  }
  const auto n = static_cast<double>(examples.size());
  m.accuracy = static_cast<double>(exact) / n;
  if (model.mode() == Mode::kFine) {
    m.precision_at_1 = static_cast<double>(p1) / n;
    const double denom = static_cast<double>(2 * tp + fp + fn);
    m.micro_f1 = denom > 0 ? static_cast<double>(2 * tp) / denom : 0.0;
  }
  return m;
}

NTPModel train_ntp(const std::vector<TypedExample>& train, const std::vector<TypedExample>& dev,
                   std::vector<std::string> type_names, Mode mode, const NTPConfig& config, std::uint64_t seed,
                   const nnet::EmbeddingTable* pretrained, TypeTrainReport* report) {
  if (train.empty()) throw Error("train_ntp: empty dataset");
  std::vector<const linker::AnalyzedQuestion*> questions;
  std::vector<std::string> ids;
  for (const auto& ex : train) {
    if (ex.labels.empty()) throw Error("train_ntp: example without type labels");
    questions.push_back(ex.question);
    ids.push_back(ex.question->id);
  }
  NTPModel model = NTPModel::create(questions, std::move(type_names), mode, config, seed, pretrained);
  model.set_trained_on(std::move(ids));

  nnet::OptimizerConfig opt_config = nnet::OptimizerConfig::adamax();
  opt_config.learning_rate = config.learning_rate;
  nnet::Adamax optimizer(opt_config);
  auto params = model.parameters();

  std::mt19937_64 rng(seed ^ 0xC2B2AE3D27D4EB4Full);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::vector<TypedExample>& monitor = dev.empty() ? train : dev;
  auto metric = [&] {
    auto m = evaluate_types(model, monitor);
    return mode == Mode::kCoarse ? m.accuracy : m.micro_f1;
  };

  std::vector<NTPModel::IndexedExample> monitor_batch;
  for (const auto& ex : monitor) monitor_batch.push_back({model.word_ids(ex.question->words(ex.question->num_tokens())), ex.labels});

  // Equal metric with lower monitor loss also counts as progress.
  double best = -1.0, best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0, stall = 0, epoch = 0;
  std::vector<nnet::Matrix> snapshot;
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<NTPModel::IndexedExample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        const TypedExample& ex = train[order[k]];
        std::size_t n = ex.question->num_tokens();
        if (config.random_truncation && n > 1) n = std::uniform_int_distribution<std::size_t>(1, n)(rng);
        batch.push_back({model.word_ids(ex.question->words(n)), ex.labels});
      }
      for (auto* p : params) p->zero_grad();
      model.loss(batch, true);
      optimizer.step(params);
    }
    const double score = metric();
    const double mon_loss = model.loss(monitor_batch, false);
    if (score > best || (score == best && mon_loss < best_loss)) {
      best = score;
      best_loss = mon_loss;
      best_epoch = epoch;
      stall = 0;
      snapshot.clear();
      for (auto* p : params) snapshot.push_back(p->value);
    } else if (++stall >= config.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
  if (report != nullptr) {
    report->epochs = std::min(epoch, config.max_epochs);
    report->best_epoch = best_epoch;
    report->best_dev_metric = best;
  }
  return model;
}

std::vector<std::string> type_names_for(Mode mode, const corpus::TypeSystem& system) {
  if (mode == Mode::kFine) return system.fine_types();
  return {corpus::kCoarseTypes.begin(), corpus::kCoarseTypes.end()};
}

std::vector<int> answer_type_indices(const NTPModel& model, const corpus::TypeEntry& entry) {
  std::vector<int> out;
  const auto& names = model.mode() == Mode::kCoarse ? entry.coarse : entry.fine;
  for (const auto& n : names) {
    if (int idx = model.type_index(n); idx >= 0) out.push_back(idx);
  }
  return out;
}

std::vector<TypedExample> make_typed_examples(const std::vector<const linker::AnalyzedQuestion*>& questions,
                                              const std::vector<std::string>& answers,
                                              const corpus::TypeAssignment& types, Mode mode,
                                              const corpus::TypeSystem& system) {
  std::vector<TypedExample> out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const corpus::TypeEntry& entry = types.assign_types(answers[i]);
    if (entry.fine.empty()) continue;
    TypedExample ex;
    ex.question = questions[i];
    if (mode == Mode::kCoarse) {
      ex.labels.push_back(system.primary_coarse(entry));
    } else {
      for (const auto& f : entry.fine) {
        if (int idx = system.fine_index(f); idx >= 0) ex.labels.push_back(idx);
      }
    }
    if (!ex.labels.empty() && ex.labels[0] >= 0) out.push_back(std::move(ex));
  }
  return out;
}

nnet::GradCheckResult check_gradients(Mode mode, std::uint64_t seed, std::size_t d_word, std::size_t d_conv,
                                      std::size_t n_types) {
  linker::MentionDictionary empty;
  std::vector<linker::AnalyzedQuestion> qs = {
      linker::analyze("t1", "alpha beta gamma delta epsilon.", empty),
      linker::analyze("t2", "zeta alpha.", empty),
      linker::analyze("t3", "eta.", empty),
  };
  std::vector<const linker::AnalyzedQuestion*> ptrs;
  for (const auto& q : qs) ptrs.push_back(&q);
  std::vector<std::string> names;
  for (std::size_t t = 0; t < n_types; ++t) names.push_back("type" + std::to_string(t));
  NTPConfig config;
  config.d_word = d_word;
  config.d_conv = d_conv;
  NTPModel model = NTPModel::create(ptrs, names, mode, config, seed);
  std::mt19937_64 rng(seed + 17);
  for (auto* p : model.parameters()) p->value.fill_uniform(-0.8f, 0.8f, rng);

  std::vector<NTPModel::IndexedExample> batch;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    NTPModel::IndexedExample ex{model.word_ids(qs[i].words(qs[i].num_tokens())), {}};
    if (mode == Mode::kCoarse) {
      ex.labels = {static_cast<int>(i % n_types)};
    } else {
      ex.labels = {static_cast<int>(i % n_types), static_cast<int>((i + 1) % n_types)};
      if (ex.labels[0] == ex.labels[1]) ex.labels.pop_back();
    }
    batch.push_back(std::move(ex));
  }
  auto params = model.parameters();
  return nnet::gradient_check([&] { return model.loss(batch, false); }, [&] { model.loss(batch, true); }, params,
                              1e-3, 40, seed);
}

}  // namespace qb::ntp
