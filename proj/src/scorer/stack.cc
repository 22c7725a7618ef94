#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <json.hpp>
#include <random>

#include "qb/error.h"
#include "qb/scorer.h"

namespace qb::scorer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMatrixMagic[5] = {'Q', 'B', 'F', 'M', '1'};

std::vector<std::string> titles_of(const std::vector<LabeledQuestion>& qs, const corpus::AnswerCatalog& catalog) {
  std::vector<std::string> out;
  for (const auto& q : qs) out.push_back(catalog.title(q.answer));
  return out;
}

std::vector<const linker::AnalyzedQuestion*> questions_of(const std::vector<LabeledQuestion>& qs) {
  std::vector<const linker::AnalyzedQuestion*> out;
  for (const auto& q : qs) out.push_back(q.question);
  return out;
}

ntp::NTPModel train_types(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                          const corpus::AnswerCatalog& catalog, const corpus::TypeAssignment& types, ntp::Mode mode,
                          const ntp::NTPConfig& config, std::uint64_t seed, const nnet::EmbeddingTable* pretrained) {
  auto tr = ntp::make_typed_examples(questions_of(train), titles_of(train, catalog), types, mode);
  auto dv = ntp::make_typed_examples(questions_of(dev), titles_of(dev, catalog), types, mode);
  if (tr.empty()) throw Error("no training question has a typed answer");
  return ntp::train_ntp(tr, dv, ntp::type_names_for(mode), mode, config, seed, pretrained);
}

bool contains(const std::vector<std::string>& ids, const std::string& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Seed for one question's truncations, independent of scheduling.
std::uint64_t question_seed(std::uint64_t seed, const std::string& id) {
  return seed ^ std::hash<std::string>{}(id);
}

void append_rows(TrainingSet& out, const CandidateSet& set, int gold) {
  bool found = false;
  for (const auto& c : set.candidates) {
    out.data.append(c.features, c.answer == gold ? 1.0f : 0.0f);
    out.row_question.push_back(set.question_id);
    out.row_answer.push_back(c.answer);
    found = found || c.answer == gold;
  }
  if (found) ++out.questions_with_gold;
}

void merge(TrainingSet& into, TrainingSet&& part) {
  if (into.data.rows == 0) into.data.cols = part.data.cols;
  into.data.x.insert(into.data.x.end(), part.data.x.begin(), part.data.x.end());
  into.data.y.insert(into.data.y.end(), part.data.y.begin(), part.data.y.end());
  into.data.rows += part.data.rows;
  into.row_question.insert(into.row_question.end(), part.row_question.begin(), part.row_question.end());
  into.row_answer.insert(into.row_answer.end(), part.row_answer.begin(), part.row_answer.end());
  into.questions_with_gold += part.questions_with_gold;
  into.audit.records.insert(into.audit.records.end(), part.audit.records.begin(), part.audit.records.end());
}

}  // namespace

std::size_t LeakageAudit::violations() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const LeakageRecord& r) {
    return r.nqs_saw || r.coarse_saw || r.fine_saw || !r.ir_excluded;
  }));
}

SubModels train_submodels(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                          const corpus::AnswerCatalog& catalog, const corpus::TypeAssignment& types,
                          const StackConfig& config, std::uint64_t seed) {
  std::vector<nqs::Example> tr, dv;
  for (const auto& q : train) tr.push_back({q.question, q.answer});
  for (const auto& q : dev) dv.push_back({q.question, q.answer});
  SubModels sub;
  sub.nqs = nqs::train_nqs(tr, dv, catalog, config.nqs, seed, config.pretrained);
  sub.coarse = train_types(train, dev, catalog, types, ntp::Mode::kCoarse, config.ntp, seed + 1, config.pretrained);
  if (config.use_fine) {
    sub.fine = train_types(train, dev, catalog, types, ntp::Mode::kFine, config.ntp, seed + 2, config.pretrained);
    sub.has_fine = true;
  }
  return sub;
}

TrainingSet build_training_set(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                               const ir::Collections& ir, const corpus::TypeAssignment& types,
                               const StackConfig& config, std::uint64_t seed) {
  if (config.folds < 2) throw Error("stacking needs at least two folds");
  if (config.truncations < 1) throw Error("truncations must be positive");
  auto n_folds = static_cast<std::size_t>(config.folds);
  if (train.size() < n_folds) throw Error("fewer training questions than folds: a fold would be empty");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(train.size());
  for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = static_cast<int>(p % n_folds);

  auto run_fold = [&](int fold) {
    std::vector<LabeledQuestion> rest, held;
    for (std::size_t i = 0; i < train.size(); ++i) (fold_of[i] == fold ? held : rest).push_back(train[i]);
    SubModels sub = train_submodels(rest, dev, ir.catalog(), types, config, seed + 1000 * (fold + 1));
    ScoringModels models{&sub.nqs, &sub.coarse, sub.has_fine ? &sub.fine : nullptr, &ir, &types, config.top_k};
    TrainingSet part;
    part.data.cols = kNumFeatures;
    for (const auto& q : held) {
      const auto& id = q.question->id;
      std::mt19937_64 qrng(question_seed(seed, id));
      std::size_t n = q.question->num_tokens();
      bool excluded = ir.exclusion(ir::CollectionKind::kDatasetPerQuestion, id).has_value() &&
                      ir.exclusion(ir::CollectionKind::kDatasetConcat, id).has_value();
      for (int t = 0; t < config.truncations; ++t) {
        std::size_t k = n > 1 ? std::uniform_int_distribution<std::size_t>(1, n)(qrng) : n;
        append_rows(part, score_question(models, *q.question, k, &id), q.answer);
        part.audit.records.push_back({id, fold, contains(sub.nqs.trained_on(), id),
                                      contains(sub.coarse.trained_on(), id),
                                      sub.has_fine && contains(sub.fine.trained_on(), id), excluded});
      }
    }
    return part;
  };

  std::vector<TrainingSet> parts(n_folds);
  unsigned threads = std::max(1u, config.threads);
  for (std::size_t start = 0; start < n_folds; start += threads) {
    std::vector<std::future<TrainingSet>> running;
    std::size_t stop = std::min(n_folds, start + threads);
    for (std::size_t f = start; f < stop; ++f) {
      auto policy = threads > 1 ? std::launch::async : std::launch::deferred;
      running.push_back(std::async(policy, run_fold, static_cast<int>(f)));
    }
    for (std::size_t f = start; f < stop; ++f) parts[f] = running[f - start].get();
  }

  TrainingSet out;
  out.data.cols = kNumFeatures;
  for (auto& p : parts) merge(out, std::move(p));
  return out;
}

TrainingSet build_eval_set(const std::vector<LabeledQuestion>& questions, const ScoringModels& models,
                           int truncations, std::uint64_t seed) {
  TrainingSet out;
  out.data.cols = kNumFeatures;
  for (const auto& q : questions) {
    std::mt19937_64 qrng(question_seed(seed, q.question->id));
    std::size_t n = q.question->num_tokens();
    for (int t = 0; t < truncations; ++t) {
      std::size_t k = n > 1 ? std::uniform_int_distribution<std::size_t>(1, n)(qrng) : n;
      append_rows(out, score_question(models, *q.question, k), q.answer);
    }
  }
  return out;
}

void write_feature_matrix(const std::string& path, const TrainingSet& set) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  os.write(kMatrixMagic, sizeof kMatrixMagic);
  u32(kFeatureLayoutVersion);
  u32(static_cast<std::uint32_t>(set.data.rows));
  u32(static_cast<std::uint32_t>(set.data.cols));
  os.write(reinterpret_cast<const char*>(set.data.x.data()), static_cast<std::streamsize>(set.data.x.size() * 4));
  os.write(reinterpret_cast<const char*>(set.data.y.data()), static_cast<std::streamsize>(set.data.y.size() * 4));
  if (!os) throw Error("failed writing " + path);

  json manifest;
  manifest["v"] = 1;
  manifest["layout_version"] = kFeatureLayoutVersion;
  manifest["features"] = feature_names();
  manifest["rows"] = set.data.rows;
  manifest["row_question"] = set.row_question;
  manifest["row_answer"] = set.row_answer;
  std::ofstream ms(path + ".json");
  if (!ms) throw Error("cannot write " + path + ".json");
  ms << manifest.dump(1) << '\n';
}

gbrt::Dataset read_feature_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  char magic[sizeof kMatrixMagic];
  std::uint32_t hdr[3];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMatrixMagic))
    throw Error(path + ": not a feature matrix");
  if (!is.read(reinterpret_cast<char*>(hdr), sizeof hdr)) throw Error(path + ": truncated header");
  if (hdr[0] != static_cast<std::uint32_t>(kFeatureLayoutVersion)) throw Error(path + ": unsupported layout version");
  gbrt::Dataset d(hdr[1], hdr[2]);
  if (!is.read(reinterpret_cast<char*>(d.x.data()), static_cast<std::streamsize>(d.x.size() * 4)) ||
      !is.read(reinterpret_cast<char*>(d.y.data()), static_cast<std::streamsize>(d.y.size() * 4)))
    throw Error(path + ": truncated matrix");
  return d;
}

ScoringModels TrainedStack::models(const ir::Collections& ir, const corpus::TypeAssignment& types) const {
  return ScoringModels{&sub_.nqs, &sub_.coarse, sub_.has_fine ? &sub_.fine : nullptr, &ir, &types, top_k_};
}

std::vector<RankedAnswer> TrainedStack::score_answers(const linker::AnalyzedQuestion& q, std::size_t n_tokens,
                                                      const ir::Collections& ir,
                                                      const corpus::TypeAssignment& types) const {
  CandidateSet set = score_question(models(ir, types), q, n_tokens);
  std::vector<RankedAnswer> out;
  for (const auto& c : set.candidates)
    out.push_back({c.answer, ir.catalog().title(c.answer), gbrt_.predict_proba(c.features)});
  std::sort(out.begin(), out.end(), [](const RankedAnswer& a, const RankedAnswer& b) {
    return a.probability != b.probability ? a.probability > b.probability : a.answer < b.answer;
  });
  return out;
}

void TrainedStack::save(const std::string& dir) const {
  fs::create_directories(dir);
  sub_.nqs.save(dir, "nqs");
  sub_.coarse.save(dir, "ntp_coarse");
  if (sub_.has_fine) sub_.fine.save(dir, "ntp_fine");
  gbrt_.save((fs::path(dir) / "gbrt.json").string());
  json meta = {{"v", 1}, {"top_k", top_k_}, {"has_fine", sub_.has_fine}, {"layout_version", kFeatureLayoutVersion}};
  std::ofstream os(fs::path(dir) / "stack.json");
  if (!os) throw Error("cannot write " + dir + "/stack.json");
  os << meta.dump(1) << '\n';
}

TrainedStack TrainedStack::load(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "stack.json");
  if (!is) throw Error("cannot read " + dir + "/stack.json");
  json meta;
  try {
    meta = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(dir + "/stack.json: " + e.what());
  }
  if (meta.value("v", 0) != 1 || meta.value("layout_version", 0) != kFeatureLayoutVersion)
    throw Error(dir + ": unsupported stack version");
  SubModels sub;
  sub.nqs = nqs::NQSModel::load(dir, "nqs");
  sub.coarse = ntp::NTPModel::load(dir, "ntp_coarse");
  sub.has_fine = meta.value("has_fine", false);
  if (sub.has_fine) sub.fine = ntp::NTPModel::load(dir, "ntp_fine");
  auto g = gbrt::GBRTModel::load((fs::path(dir) / "gbrt.json").string());
  if (g.num_features() != static_cast<std::size_t>(kNumFeatures)) throw Error(dir + ": GBRT feature count mismatch");
  return TrainedStack(std::move(sub), std::move(g), meta.value("top_k", std::size_t{5}));
}

TrainedStack train_stack(const std::vector<LabeledQuestion>& train, const std::vector<LabeledQuestion>& dev,
                         const ir::Collections& ir, const corpus::TypeAssignment& types, const StackConfig& config,
                         std::uint64_t seed, StackReport* report, TrainingSet* training_rows,
                         TrainingSet* dev_rows) {
  TrainingSet ts = build_training_set(train, dev, ir, types, config, seed);
  SubModels sub = train_submodels(train, dev, ir.catalog(), types, config, seed);
  ScoringModels models{&sub.nqs, &sub.coarse, sub.has_fine ? &sub.fine : nullptr, &ir, &types, config.top_k};
  TrainingSet dv = build_eval_set(dev, models, config.truncations, seed + 7);
  gbrt::TrainLog log;
  auto g = gbrt::train(ts.data, dv.data, config.boost, &log);
  g.feature_names() = feature_names();
  if (report) {
    report->training_rows = ts.data.rows;
    report->dev_rows = dv.data.rows;
    report->leakage_violations = ts.audit.violations();
    report->gbrt_rounds = log.best_rounds;
  }
  if (training_rows) *training_rows = std::move(ts);
  if (dev_rows) *dev_rows = std::move(dv);
  return TrainedStack(std::move(sub), std::move(g), config.top_k);
}

}  // namespace qb::scorer
