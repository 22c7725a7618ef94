#include "qb/nqs.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>

#include "qb/error.h"

namespace qb::nqs {

QuestionInput make_input(const linker::AnalyzedQuestion& q, std::size_t n_tokens) {
  return {q.words(n_tokens), q.entities(n_tokens)};
}

NQSModel NQSModel::create(const std::vector<const linker::AnalyzedQuestion*>& questions,
                          const corpus::AnswerCatalog& catalog, const NQSConfig& config, std::uint64_t seed,
                          const nnet::EmbeddingTable* pretrained) {
  if (config.dim == 0) throw Error("NQS dimension must be positive");
  std::set<std::string> words, entities;
  for (const auto* q : questions) {
    for (const auto& t : q->tt.tokens) words.insert(t.lower);
    for (const auto& m : q->mentions) entities.insert(m.entity);
  }
  NQSModel model;
  model.dim_ = config.dim;
  model.catalog_ = catalog;
  model.words_.assign(words.begin(), words.end());
  model.entities_.assign(entities.begin(), entities.end());
  model.build_index();

  const std::size_t d = config.dim;
  model.word_table_ = nnet::Parameter("word_table", model.words_.size(), d);
  model.entity_table_ = nnet::Parameter("entity_table", model.entities_.size(), d);
  model.answer_table_ = nnet::Parameter("answer_table", catalog.size(), d);
  model.answer_table_.frozen = true;
  model.proj_word_ = nnet::Parameter("word_projection", d, d);
  model.proj_entity_ = nnet::Parameter("entity_projection", d, d);

  std::mt19937_64 rng(seed);
  const float scale = 0.5f / static_cast<float>(d);
  model.word_table_.value.fill_uniform(-scale, scale, rng);
  model.entity_table_.value.fill_uniform(-scale, scale, rng);
  model.answer_table_.value.fill_uniform(-scale, scale, rng);
  if (config.identity_projection) {
    for (std::size_t i = 0; i < d; ++i) {
      model.proj_word_.value(i, i) = 1.0f;
      model.proj_entity_.value(i, i) = 1.0f;
    }
  } else {
    const auto limit = static_cast<float>(std::sqrt(6.0 / (2.0 * static_cast<double>(d))));
    model.proj_word_.value.fill_uniform(-limit, limit, rng);
    model.proj_entity_.value.fill_uniform(-limit, limit, rng);
  }

  if (pretrained != nullptr) {
    if (pretrained->dim() != d) throw Error("pretrained embedding dim does not match NQS dim");
    auto copy_row = [&](nnet::Matrix& dst, std::size_t row, const std::string& token) {
      int src = pretrained->index(token);
      if (src < 0) return;
      auto from = pretrained->table().row(static_cast<std::size_t>(src));
      std::copy(from.begin(), from.end(), dst.row(row).begin());
    };
    for (std::size_t i = 0; i < model.words_.size(); ++i) copy_row(model.word_table_.value, i, model.words_[i]);
    for (std::size_t i = 0; i < model.entities_.size(); ++i) {
      copy_row(model.entity_table_.value, i, nnet::entity_token(model.entities_[i]));
    }
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      copy_row(model.answer_table_.value, i, nnet::entity_token(catalog.title(static_cast<int>(i))));
    }
  }
  return model;
}

void NQSModel::build_index() {
  word_index_.clear();
  entity_index_.clear();
  for (std::size_t i = 0; i < words_.size(); ++i) word_index_.emplace(words_[i], static_cast<int>(i));
  for (std::size_t i = 0; i < entities_.size(); ++i) entity_index_.emplace(entities_[i], static_cast<int>(i));
}

int NQSModel::word_id(const std::string& w) const {
  auto it = word_index_.find(w);
  return it == word_index_.end() ? -1 : it->second;
}

int NQSModel::entity_id(const std::string& title) const {
  auto it = entity_index_.find(title);
  return it == entity_index_.end() ? -1 : it->second;
}

std::vector<nnet::Parameter*> NQSModel::parameters() {
  return {&word_table_, &entity_table_, &answer_table_, &proj_word_, &proj_entity_};
}

NQSModel::IndexedExample NQSModel::index(const QuestionInput& input, int answer) const {
  IndexedExample ex;
  ex.answer = answer;
  for (const auto& w : input.words) {
    if (int id = word_id(w); id >= 0) ex.words.push_back(id);
  }
  for (const auto& e : input.entities) {
    if (int id = entity_id(e); id >= 0) ex.entities.push_back(id);
  }
  return ex;
}

namespace {

// Mean of the selected rows, in double.
std::vector<double> mean_rows(const nnet::Matrix& table, const std::vector<int>& ids, std::size_t d) {
  std::vector<double> mean(d, 0.0);
  if (ids.empty()) return mean;
  for (int id : ids) {
    auto row = table.row(static_cast<std::size_t>(id));
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : mean) v *= inv;
  return mean;
}

std::vector<double> mat_vec(const nnet::Matrix& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

}  // namespace

QuestionEncoding NQSModel::encode(const QuestionInput& input) const {
  IndexedExample ex = index(input, -1);
  QuestionEncoding enc;
  enc.n_words_used = ex.words.size();
  enc.n_entities_used = ex.entities.size();
  enc.word_part = mat_vec(proj_word_.value, mean_rows(word_table_.value, ex.words, dim_));
  enc.entity_part = mat_vec(proj_entity_.value, mean_rows(entity_table_.value, ex.entities, dim_));
  enc.combined.resize(dim_);
  for (std::size_t i = 0; i < dim_; ++i) enc.combined[i] = enc.word_part[i] + enc.entity_part[i];
  return enc;
}

std::vector<double> NQSModel::logits(const QuestionEncoding& enc) const {
  std::vector<double> out(answer_table_.value.rows());
  for (std::size_t e = 0; e < out.size(); ++e) {
    auto a = answer_table_.value.row(e);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) acc += a[i] * enc.combined[i];
    out[e] = acc;
  }
  return out;
}

std::vector<double> NQSModel::predict(const QuestionInput& input) const { return nnet::softmax(logits(encode(input))); }

std::pair<double, double> NQSModel::scores(const QuestionInput& input, const std::string& answer) const {
  int id = catalog_.id(answer);
  if (id < 0) throw Error("answer not in catalog: " + answer);
  auto z = logits(encode(input));
  auto p = nnet::softmax(z);
  return {p[static_cast<std::size_t>(id)], z[static_cast<std::size_t>(id)]};
}

double NQSModel::loss(const std::vector<IndexedExample>& batch, bool accumulate) {
  if (batch.empty()) return 0.0;
  const std::size_t d = dim_;
  const std::size_t n_answers = answer_table_.value.rows();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (const auto& ex : batch) {
    auto mean_w = mean_rows(word_table_.value, ex.words, d);
    auto mean_e = mean_rows(entity_table_.value, ex.entities, d);
    auto v = mat_vec(proj_word_.value, mean_w);
    auto v_e = mat_vec(proj_entity_.value, mean_e);
    for (std::size_t i = 0; i < d; ++i) v[i] += v_e[i];

    std::vector<double> z(n_answers);
    for (std::size_t e = 0; e < n_answers; ++e) {
      auto a = answer_table_.value.row(e);
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += a[i] * v[i];
      z[e] = acc;
    }
    auto p = nnet::softmax(z);
    const auto gold = static_cast<std::size_t>(ex.answer);
    total += -std::log(std::max(p[gold], 1e-300));
    if (!accumulate) continue;

    // dL/dz = p - onehot; dL/dv = A^T dz.
    std::vector<double> dv(d, 0.0);
    for (std::size_t e = 0; e < n_answers; ++e) {
      const double dz = (p[e] - (e == gold ? 1.0 : 0.0)) * scale;
      auto a = answer_table_.value.row(e);
      for (std::size_t i = 0; i < d; ++i) dv[i] += dz * a[i];
    }
    auto backprop = [&](nnet::Parameter& proj, nnet::Parameter& table, const std::vector<int>& ids,
                        const std::vector<double>& mean) {
      if (ids.empty()) return;
      std::vector<double> dmean(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        auto grow = proj.grad.row(i);
        auto wrow = proj.value.row(i);
        for (std::size_t j = 0; j < d; ++j) {
          grow[j] += static_cast<float>(dv[i] * mean[j]);
          dmean[j] += wrow[j] * dv[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(ids.size());
      for (int id : ids) {
        auto grow = table.grad.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < d; ++j) grow[j] += static_cast<float>(dmean[j] * inv);
      }
    };
    backprop(proj_word_, word_table_, ex.words, mean_w);
    backprop(proj_entity_, entity_table_, ex.entities, mean_e);
  }
  return total * scale;
}

void NQSModel::save(const std::string& dir, const std::string& stem) const {
  nlohmann::json meta = {{"model", "nqs"},
                         {"dim", dim_},
                         {"answers", catalog_.size()},
                         {"words_hash", nnet::vocabulary_hash(words_)},
                         {"entities_hash", nnet::vocabulary_hash(entities_)},
                         {"answers_hash", nnet::vocabulary_hash(catalog_.answers())}};
  nnet::save_tensors(dir, stem, meta,
                     {{"word_table", &word_table_.value},
                      {"entity_table", &entity_table_.value},
                      {"answer_table", &answer_table_.value},
                      {"word_projection", &proj_word_.value},
                      {"entity_projection", &proj_entity_.value}});
  nnet::write_lines(dir + "/" + stem + ".words.txt", words_);
  nnet::write_lines(dir + "/" + stem + ".entities.txt", entities_);
  nnet::write_lines(dir + "/" + stem + ".answers.txt", catalog_.answers());
  nnet::write_lines(dir + "/" + stem + ".trained_on.txt", trained_on_);
}

NQSModel NQSModel::load(const std::string& dir, const std::string& stem) {
  auto loaded = nnet::load_tensors(dir, stem);
  if (loaded.meta.value("model", "") != "nqs") throw Error("not an NQS model: " + stem);
  NQSModel m;
  m.dim_ = loaded.meta["dim"].get<std::size_t>();
  m.words_ = nnet::read_lines(dir + "/" + stem + ".words.txt");
  m.entities_ = nnet::read_lines(dir + "/" + stem + ".entities.txt");
  m.catalog_ = corpus::AnswerCatalog::from_titles(nnet::read_lines(dir + "/" + stem + ".answers.txt"));
  if (nnet::vocabulary_hash(m.words_) != loaded.meta["words_hash"].get<std::uint64_t>() ||
      nnet::vocabulary_hash(m.entities_) != loaded.meta["entities_hash"].get<std::uint64_t>() ||
      nnet::vocabulary_hash(m.catalog_.answers()) != loaded.meta["answers_hash"].get<std::uint64_t>()) {
    throw Error("NQS vocabulary files do not match manifest");
  }
  if (std::filesystem::exists(dir + "/" + stem + ".trained_on.txt")) {
    m.trained_on_ = nnet::read_lines(dir + "/" + stem + ".trained_on.txt");
  }
  m.build_index();
  auto take = [&](nnet::Parameter& p, const std::string& name) {
    p.name = name;
    p.value = std::move(loaded.tensors.at(name));
    p.grad = nnet::Matrix(p.value.rows(), p.value.cols());
  };
  take(m.word_table_, "word_table");
  take(m.entity_table_, "entity_table");
  take(m.answer_table_, "answer_table");
  take(m.proj_word_, "word_projection");
  take(m.proj_entity_, "entity_projection");
  m.answer_table_.frozen = true;
  return m;
}

namespace {

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

double accuracy(const NQSModel& model, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (argmax(model.predict(make_input(*ex.question))) == ex.answer) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

NQSModel train_nqs(const std::vector<Example>& train, const std::vector<Example>& dev,
                   const corpus::AnswerCatalog& catalog, const NQSConfig& config, std::uint64_t seed,
                   const nnet::EmbeddingTable* pretrained, TrainReport* report) {
  if (train.empty()) throw Error("train_nqs: empty training set");
  std::vector<const linker::AnalyzedQuestion*> questions;
  std::vector<std::string> ids;
  for (const auto& ex : train) {
    if (ex.answer < 0 || static_cast<std::size_t>(ex.answer) >= catalog.size()) {
      throw Error("train_nqs: example answer outside the catalog");
    }
    questions.push_back(ex.question);
    ids.push_back(ex.question->id);
  }
  NQSModel model = NQSModel::create(questions, catalog, config, seed, pretrained);
  model.set_trained_on(std::move(ids));

  nnet::OptimizerConfig opt_config = nnet::OptimizerConfig::adam();
  opt_config.learning_rate = config.learning_rate;
  nnet::Adam optimizer(opt_config);
  auto params = model.parameters();

  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::bernoulli_distribution drop(config.dropout);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const std::vector<Example>& monitor = dev.empty() ? train : dev;
  std::vector<NQSModel::IndexedExample> monitor_batch;
  for (const auto& ex : monitor) {
    monitor_batch.push_back(model.index(make_input(*ex.question, ex.question->num_tokens()), ex.answer));
  }
  // Equal accuracy with lower monitor loss also counts as progress.
  double best = -1.0, best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0, stall = 0, epoch = 0;
  std::vector<nnet::Matrix> snapshot;

  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<NQSModel::IndexedExample> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        const Example& ex = train[order[k]];
        std::size_t n = ex.question->num_tokens();
        if (config.random_truncation && n > 1) {
          n = std::uniform_int_distribution<std::size_t>(1, n)(rng);
        }
        auto idx = model.index(make_input(*ex.question, n), ex.answer);
        if (config.dropout > 0.0) {
          std::erase_if(idx.words, [&](int) { return drop(rng); });
          std::erase_if(idx.entities, [&](int) { return drop(rng); });
        }
        batch.push_back(std::move(idx));
      }
      for (auto* p : params) p->zero_grad();
      model.loss(batch, true);
      optimizer.step(params);
    }
    double acc = accuracy(model, monitor);
    double mon_loss = model.loss(monitor_batch, false);
    if (acc > best || (acc == best && mon_loss < best_loss)) {
      best = acc;
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
    report->best_dev_accuracy = best;
    report->final_train_accuracy = accuracy(model, train);
  }
  return model;
}

nnet::GradCheckResult check_gradients(std::uint64_t seed, std::size_t dim) {
  linker::MentionDictionary dict;
  dict.add("zed qux", {0.5, 1.0, "Zed Qux"});
  dict.add("orbo", {0.5, 1.0, "Orbo"});
  std::vector<linker::AnalyzedQuestion> qs = {
      linker::analyze("g1", "alpha beta gamma met Zed Qux near orbo.", dict),
      linker::analyze("g2", "delta alpha epsilon with Orbo.", dict),
      linker::analyze("g3", "gamma gamma zeta eta.", dict),
  };
  std::vector<const linker::AnalyzedQuestion*> ptrs;
  for (const auto& q : qs) ptrs.push_back(&q);
  auto catalog = corpus::AnswerCatalog::from_titles({"A1", "A2", "A3", "A4"});
  NQSConfig config;
  config.dim = dim;
  NQSModel model = NQSModel::create(ptrs, catalog, config, seed);
  std::mt19937_64 rng(seed + 1);
  for (auto* p : model.parameters()) p->value.fill_uniform(-0.5f, 0.5f, rng);

  std::vector<NQSModel::IndexedExample> batch;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    batch.push_back(model.index(make_input(qs[i]), static_cast<int>(i % catalog.size())));
  }
  auto params = model.parameters();
  return nnet::gradient_check([&] { return model.loss(batch, false); }, [&] { model.loss(batch, true); }, params,
                              1e-3, 40, seed);
}

}  // namespace qb::nqs
