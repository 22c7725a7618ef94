#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "qb/error.h"
#include "qb/nnet.h"
#include "qb/pipeline.h"

namespace qb::pipeline {

namespace fs = std::filesystem;

namespace {

void require(const std::string& path, const char* what) {
  if (path.empty()) throw Error(std::string("config does not name a ") + what + " file");
  if (!fs::exists(path)) throw Error(std::string(what) + " file not found: " + path);
}

std::vector<corpus::QuestionRecord> read_split(const Layout& lay, const std::string& name) {
  require(lay.split(name), "split (run ingest first)");
  return corpus::ingest_dataset(lay.split(name), corpus::AliasTable{});
}

corpus::AnswerCatalog read_catalog(const Layout& lay) {
  require(lay.answers(), "answer list (run ingest first)");
  return corpus::AnswerCatalog::from_titles(nnet::read_lines(lay.answers()));
}

linker::MentionDictionary read_dictionary(const PipelineConfig& c, std::ostream& log) {
  require(c.paths.mentions, "mention dictionary");
  std::vector<std::string> warnings;
  auto dict = linker::MentionDictionary::load(c.paths.mentions, &warnings);
  if (!warnings.empty()) log << "mention dictionary: " << warnings.size() << " duplicate surfaces (last kept)\n";
  return dict;
}

corpus::TypeAssignment read_types(const PipelineConfig& c) {
  require(c.paths.types, "type mapping");
  return corpus::TypeAssignment::load(c.paths.types);
}

std::optional<nnet::EmbeddingTable> read_embeddings(const PipelineConfig& c, std::size_t dim) {
  if (c.paths.embeddings.empty()) return std::nullopt;
  require(c.paths.embeddings, "embeddings");
  return nnet::EmbeddingTable::load(c.paths.embeddings, dim);
}

// Top answer of the candidates under `model`, ties by answer id.
int top_by(const gbrt::GBRTModel& model, const scorer::CandidateSet& set) {
  int best = -1;
  double best_p = -1.0;
  for (const auto& c : set.candidates) {
    double p = model.predict_proba(c.features);
    if (p > best_p || (p == best_p && c.answer < best)) {
      best_p = p;
      best = c.answer;
    }
  }
  return best;
}

}  // namespace

std::vector<scorer::LabeledQuestion> AnalyzedSplit::labeled(const corpus::AnswerCatalog& catalog) const {
  std::vector<scorer::LabeledQuestion> out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    int id = catalog.id(records[i].answer);
    if (id >= 0) out.push_back({&questions[i], id});
  }
  return out;
}

AnalyzedSplit analyze_split(const std::vector<corpus::QuestionRecord>& records, const linker::MentionDictionary& dict,
                            linker::Thresholds thresholds) {
  AnalyzedSplit s;
  s.records = records;
  s.questions.reserve(records.size());
  for (const auto& r : records) s.questions.push_back(linker::analyze(r.id, r.text, dict, thresholds));
  return s;
}

void ingest(const PipelineConfig& c, std::ostream& log) {
  require(c.paths.dataset, "dataset");
  corpus::AliasTable aliases;
  if (!c.paths.aliases.empty()) {
    require(c.paths.aliases, "alias");
    aliases = corpus::AliasTable::load(c.paths.aliases);
  }
  std::vector<std::string> titles;
  if (!c.paths.wiki.empty()) {
    require(c.paths.wiki, "wiki");
    for (const auto& p : ir::load_wiki(c.paths.wiki)) titles.push_back(p.title);
  }
  corpus::IngestReport report;
  auto records = corpus::ingest_dataset(c.paths.dataset, aliases, &report, titles.empty() ? nullptr : &titles);
  auto unique = corpus::deduplicate(records);
  auto kept = corpus::filter_rare_answers(unique, c.min_answer_count);
  auto split = corpus::split_dataset(kept, c.seed);
  auto catalog = corpus::AnswerCatalog::from_records(kept);

  Layout lay = layout(c);
  fs::create_directories(fs::path(lay.split("train")).parent_path());
  corpus::write_dataset(lay.split("train"), split.train);
  corpus::write_dataset(lay.split("dev"), split.dev);
  corpus::write_dataset(lay.split("test"), split.test);
  nnet::write_lines(lay.answers(), catalog.answers());

  log << "lines " << report.lines << ", malformed " << report.malformed << ", unresolved " << report.unresolved
      << ", duplicates " << records.size() - unique.size() << ", rare-answer drops " << unique.size() - kept.size()
      << "\n";
  log << "answers " << catalog.size() << "; train " << split.train.size() << ", dev " << split.dev.size()
      << ", test " << split.test.size() << "\n";
}

void build_index(const PipelineConfig& c, std::ostream& log) {
  Layout lay = layout(c);
  std::vector<ir::WikiPage> wiki;
  if (!c.paths.wiki.empty()) {
    require(c.paths.wiki, "wiki");
    wiki = ir::load_wiki(c.paths.wiki);
  }
  auto col = ir::Collections::build(wiki, read_split(lay, "train"), read_catalog(lay));
  col.save(lay.index());
  for (auto k : ir::kAllCollections)
    log << ir::to_string(k) << ": " << col.index(k).num_docs() << " documents, " << col.index(k).num_terms()
        << " terms\n";
  log << "answers without a wiki page: " << col.missing_pages().size() << "\n";
}

void train_nqs(const PipelineConfig& c, std::ostream& log) {
  Layout lay = layout(c);
  auto catalog = read_catalog(lay);
  auto dict = read_dictionary(c, log);
  auto train = analyze_split(read_split(lay, "train"), dict, c.thresholds);
  auto dev = analyze_split(read_split(lay, "dev"), dict, c.thresholds);
  std::vector<nqs::Example> tr, dv;
  for (const auto& q : train.labeled(catalog)) tr.push_back({q.question, q.answer});
  for (const auto& q : dev.labeled(catalog)) dv.push_back({q.question, q.answer});
  auto emb = read_embeddings(c, c.nqs.dim);
  nqs::TrainReport report;
  auto model = nqs::train_nqs(tr, dv, catalog, c.nqs, c.seed, emb ? &*emb : nullptr, &report);
  fs::create_directories(lay.models());
  model.save(lay.models(), "nqs");
  log << "nqs: epochs " << report.epochs << ", best epoch " << report.best_epoch << ", dev accuracy "
      << report.best_dev_accuracy << ", train accuracy " << report.final_train_accuracy << "\n";
}

void train_ntp(const PipelineConfig& c, std::ostream& log) {
  Layout lay = layout(c);
  auto catalog = read_catalog(lay);
  auto dict = read_dictionary(c, log);
  auto types = read_types(c);
  auto train = analyze_split(read_split(lay, "train"), dict, c.thresholds);
  auto dev = analyze_split(read_split(lay, "dev"), dict, c.thresholds);
  auto emb = read_embeddings(c, c.ntp.d_word);
  fs::create_directories(lay.models());
  std::vector<ntp::Mode> modes = {ntp::Mode::kCoarse};
  if (c.use_fine) modes.push_back(ntp::Mode::kFine);
  for (auto mode : modes) {
    auto examples = [&](const AnalyzedSplit& s) {
      std::vector<const linker::AnalyzedQuestion*> qs;
      std::vector<std::string> answers;
      for (std::size_t i = 0; i < s.questions.size(); ++i) {
        qs.push_back(&s.questions[i]);
        answers.push_back(s.records[i].answer);
      }
      return ntp::make_typed_examples(qs, answers, types, mode);
    };
    auto tr = examples(train);
    auto dv = examples(dev);
    if (tr.empty()) throw Error("no training question has a typed answer");
    ntp::TypeTrainReport report;
    auto model = ntp::train_ntp(tr, dv, ntp::type_names_for(mode), mode, c.ntp, c.seed + 1,
                                emb ? &*emb : nullptr, &report);
    model.save(lay.models(), "ntp_" + ntp::to_string(mode));
    auto m = ntp::evaluate_types(model, dv.empty() ? tr : dv);
    log << "ntp " << ntp::to_string(mode) << ": epochs " << report.epochs << ", accuracy " << m.accuracy;
    if (mode == ntp::Mode::kFine) log << ", P@1 " << m.precision_at_1 << ", micro-F1 " << m.micro_f1;
    log << "\n";
  }
}

std::vector<std::pair<std::string, std::vector<char>>> ablation_masks() {
  auto mask = [](bool nqs, bool ntp, bool ir) {
    std::vector<char> m(scorer::kNumFeatures, 0);
    for (int s = 0; s < scorer::kNumBaseScores; ++s) {
      bool on = s < scorer::kNtpCoarseSum ? nqs : s < scorer::kIrFirst ? ntp : ir;
      for (int k = 0; k < 3; ++k) m[static_cast<std::size_t>(3 * s + k)] = on ? 1 : 0;
    }
    for (int e = 3 * scorer::kNumBaseScores; e < scorer::kNumFeatures; ++e) m[static_cast<std::size_t>(e)] = 1;
    return m;
  };
  return {{"nqs", mask(true, false, false)},
          {"ir", mask(false, false, true)},
          {"nqs+ir", mask(true, false, true)},
          {"nqs+ir+ntp", mask(true, true, true)}};
}

void train_scorer(const PipelineConfig& c, bool ablation, std::ostream& log) {
  Layout lay = layout(c);
  auto dict = read_dictionary(c, log);
  auto types = read_types(c);
  auto train_records = read_split(lay, "train");
  auto dev_records = read_split(lay, "dev");
  require(lay.index() + "/answers.txt", "index (run build-index first)");
  auto col = ir::Collections::load(lay.index());
  auto train = analyze_split(train_records, dict, c.thresholds);
  auto dev = analyze_split(dev_records, dict, c.thresholds);
  auto sc = c.stack_config();
  std::optional<nnet::EmbeddingTable> emb;
  if (!c.paths.embeddings.empty()) {
    if (c.nqs.dim != c.ntp.d_word) throw Error("pretrained embeddings need nqs.dim == ntp.d_word");
    emb = read_embeddings(c, c.nqs.dim);
    sc.pretrained = &*emb;
  }
  scorer::StackReport report;
  scorer::TrainingSet rows, dev_rows;
  auto stack = scorer::train_stack(train.labeled(col.catalog()), dev.labeled(col.catalog()), col, types, sc, c.seed,
                                   &report, &rows, &dev_rows);
  if (report.leakage_violations > 0)
    throw Error("stacking audit found " + std::to_string(report.leakage_violations) + " leaking rows");
  stack.save(lay.stack());
  scorer::write_feature_matrix(lay.features(), rows);
  log << "training rows " << report.training_rows << " (" << rows.questions_with_gold << " of "
      << rows.audit.records.size() << " truncations contain the gold answer), dev rows " << report.dev_rows
      << ", leakage violations 0, GBRT rounds " << report.gbrt_rounds << "\n";
  if (!ablation) return;
  for (const auto& [name, mask] : ablation_masks()) {
    auto cfg = c.boost;
    cfg.feature_mask = mask;
    gbrt::TrainLog tl;
    auto g = gbrt::train(rows.data, dev_rows.data, cfg, &tl);
    g.feature_names() = scorer::feature_names();
    g.save((fs::path(lay.stack()) / ("ablation_" + name + ".json")).string());
    log << "ablation " << name << ": GBRT rounds " << tl.best_rounds << "\n";
  }
}

match::EvalReport eval(const PipelineConfig& c, const std::string& prefix, std::ostream& log) {
  static const std::vector<std::string> kPrefixes = {"1", "2", "3", "full", "all"};
  if (std::find(kPrefixes.begin(), kPrefixes.end(), prefix) == kPrefixes.end())
    throw Error("prefix must be one of 1, 2, 3, full, all");
  auto engine = Engine::load(c);
  Layout lay = layout(c);
  std::vector<linker::AnalyzedQuestion> questions;
  for (const auto& r : engine->test_records()) questions.push_back(engine->analyze(r.id, r.text));
  std::vector<match::EvalQuestion> eq;
  const auto& catalog = engine->collections().catalog();
  for (std::size_t i = 0; i < questions.size(); ++i)
    eq.push_back({&questions[i], catalog.id(engine->test_records()[i].answer)});

  auto models = engine->stack().models(engine->collections(), engine->types());
  auto ranker_for = [&](const gbrt::GBRTModel& g) {
    return [&models, &g](const linker::AnalyzedQuestion& q, std::size_t n) {
      return top_by(g, scorer::score_question(models, q, n));
    };
  };
  match::EvalReport report;
  std::vector<std::pair<std::string, gbrt::GBRTModel>> ablations;
  for (const auto& [name, mask] : ablation_masks()) {
    auto path = fs::path(lay.stack()) / ("ablation_" + name + ".json");
    if (fs::exists(path)) ablations.emplace_back(name, gbrt::GBRTModel::load(path.string()));
  }
  for (const auto& [name, g] : ablations) report.rows.push_back(match::evaluate(eq, ranker_for(g), name));
  report.rows.push_back(match::evaluate(eq, ranker_for(engine->stack().gbrt()), "full"));

  log << report.format();
  const auto& full = report.rows.back();
  static const char* kLabels[] = {"1", "2", "3", "full"};
  for (std::size_t l = 0; l < 4; ++l)
    if (prefix == "all" || prefix == kLabels[l]) log << "accuracy@" << kLabels[l] << " " << full.accuracy[l] << "\n";
  return report;
}

std::unique_ptr<Engine> Engine::load(const PipelineConfig& c) {
  auto e = std::make_unique<Engine>();
  Layout lay = layout(c);
  e->config_ = c;
  std::ostringstream sink;
  e->dict_ = read_dictionary(c, sink);
  e->types_ = read_types(c);
  require(lay.index() + "/answers.txt", "index (run build-index first)");
  e->ir_ = ir::Collections::load(lay.index());
  require(lay.stack() + "/stack.json", "stack (run train-scorer first)");
  e->stack_ = scorer::TrainedStack::load(lay.stack());
  if (e->stack_.sub().nqs.catalog().size() != e->ir_.catalog().size())
    throw Error("stack and index were built from different answer sets");
  if (!c.paths.aliases.empty() && fs::exists(c.paths.aliases)) e->aliases_ = corpus::AliasTable::load(c.paths.aliases);
  if (fs::exists(lay.split("test"))) e->test_ = read_split(lay, "test");
  return e;
}

linker::AnalyzedQuestion Engine::analyze(const std::string& id, const std::string& text) const {
  return linker::analyze(id, text, dict_, config_.thresholds);
}

std::vector<scorer::RankedAnswer> Engine::rank(const linker::AnalyzedQuestion& q, std::size_t n_tokens) const {
  return stack_.score_answers(q, n_tokens, ir_, types_);
}

std::vector<std::string> Engine::aliases_of(const std::string& title) const {
  std::vector<std::string> out;
  for (const auto& [alias, t] : aliases_.entries())
    if (t == title) out.push_back(alias);
  std::sort(out.begin(), out.end());
  return out;
}

match::Guess EngineGuesser::guess(const match::MatchQuestion& q, std::size_t revealed) {
  auto ranked = engine_->rank(q.analyzed, revealed);
  if (ranked.empty()) return {"", 0.0};
  return {ranked.front().title, ranked.front().probability};
}

std::vector<match::MatchQuestion> match_questions(const Engine& engine, std::size_t limit) {
  std::vector<match::MatchQuestion> out;
  for (const auto& r : engine.test_records()) {
    if (out.size() >= limit) break;
    out.push_back(match::make_match_question(engine.analyze(r.id, r.text), r.answer, engine.aliases_of(r.answer)));
  }
  return out;
}

}  // namespace qb::pipeline
