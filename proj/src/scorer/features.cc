#include <algorithm>
#include <numeric>
#include <set>

#include "qb/error.h"
#include "qb/nnet.h"
#include "qb/scorer.h"

namespace qb::scorer {

const std::vector<std::string>& base_score_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {"nqs_prob",       "nqs_logit",    "ntp_coarse_sum",
                                  "ntp_coarse_max", "ntp_fine_sum", "ntp_fine_max"};
    for (int i = 0; i < ir::kNumScores; ++i) n.push_back(ir::score_name(i));
    return n;
  }();
  return names;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& b : base_score_names()) {
      n.push_back(b + ".value");
      n.push_back(b + ".rank");
      n.push_back(b + ".margin");
    }
    n.insert(n.end(), {"question_words", "question_sentences", "answer_fine_types", "answer_in_question"});
    return n;
  }();
  return names;
}

bool answer_in_question(const std::string& title, const std::vector<std::string>& question_words) {
  std::string t = title;
  std::replace(t.begin(), t.end(), '_', ' ');
  if (auto open = t.rfind(" ("); open != std::string::npos && t.back() == ')') t.erase(open);
  std::vector<std::string> needle = textproc::tokenize(t).lowered();
  if (needle.empty() || needle.size() > question_words.size()) return false;
  return std::search(question_words.begin(), question_words.end(), needle.begin(), needle.end()) !=
         question_words.end();
}

std::vector<int> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](int a, int b) {
    auto sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  idx.resize(k);
  return idx;
}

std::vector<int> generate_candidates(const std::vector<std::vector<int>>& ranked_sources, std::size_t k) {
  std::set<int> out;
  for (const auto& src : ranked_sources)
    for (std::size_t i = 0; i < std::min(k, src.size()); ++i)
      if (src[i] >= 0) out.insert(src[i]);
  return {out.begin(), out.end()};
}

FeatureVector assemble_features(const std::vector<int>& answers, const std::vector<ScoreBundle>& bundles,
                                std::size_t index, const QuestionExtras& extras, std::size_t n_fine_types,
                                bool in_question) {
  if (answers.size() != bundles.size() || index >= answers.size())
    throw Error("assemble_features: candidate index out of range");
  FeatureVector f{};
  const ScoreBundle& mine = bundles[index];
  int me = answers[index];
  for (int s = 0; s < kNumBaseScores; ++s) {
    auto si = static_cast<std::size_t>(s);
    double v = mine[si];
    double top = v;
    int ahead = 0;
    for (std::size_t j = 0; j < bundles.size(); ++j) {
      double o = bundles[j][si];
      top = std::max(top, o);
      if (j != index && (o > v || (o == v && answers[j] < me))) ++ahead;
    }
    f[3 * si] = static_cast<float>(v);
    f[3 * si + 1] = static_cast<float>(ahead + 1);
    f[3 * si + 2] = static_cast<float>(top - v);
  }
  constexpr std::size_t e = 3 * kNumBaseScores;
  f[e] = static_cast<float>(extras.word_count);
  f[e + 1] = static_cast<float>(extras.sentence_count);
  f[e + 2] = static_cast<float>(n_fine_types);
  f[e + 3] = in_question ? 1.0f : 0.0f;
  return f;
}

namespace {

std::pair<double, double> type_scores(const ntp::NTPModel& model, const ntp::TypePrediction& pred,
                                      const corpus::TypeEntry& entry) {
  return ntp::ntp_answer_scores(pred, ntp::answer_type_indices(model, entry));
}

}  // namespace

CandidateSet score_question(const ScoringModels& models, const linker::AnalyzedQuestion& q, std::size_t n_tokens,
                            const std::string* exclude_question_id) {
  if (!models.nqs || !models.coarse || !models.ir || !models.types) throw Error("score_question: missing model");
  if (models.nqs->catalog().size() != models.ir->catalog().size())
    throw Error("score_question: NQS and IR answer catalogs differ");
  n_tokens = std::min(n_tokens, q.num_tokens());

  CandidateSet set;
  set.question_id = q.id;
  set.n_tokens = n_tokens;

  auto enc = models.nqs->encode(nqs::make_input(q, n_tokens));
  auto logits = models.nqs->logits(enc);
  auto probs = nnet::softmax(logits);

  auto words = q.words(n_tokens);
  auto coarse = models.coarse->predict_types(words);
  ntp::TypePrediction fine;
  if (models.fine) fine = models.fine->predict_types(words);

  auto query = ir::make_query(q.prefix_text(n_tokens));
  std::vector<std::vector<int>> sources{top_k(probs, models.top_k)};
  for (auto c : ir::kAllCollections) {
    std::vector<int> ranked;
    for (const auto& r : models.ir->top_answers(query, c, models.top_k, exclude_question_id)) ranked.push_back(r.answer);
    sources.push_back(std::move(ranked));
  }
  std::vector<int> answers = generate_candidates(sources, models.top_k);

  std::vector<ScoreBundle> bundles(answers.size());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    auto a = static_cast<std::size_t>(answers[i]);
    const auto& entry = models.types->assign_types(models.ir->catalog().title(answers[i]));
    ScoreBundle& b = bundles[i];
    b[kNqsProb] = probs[a];
    b[kNqsLogit] = logits[a];
    std::tie(b[kNtpCoarseSum], b[kNtpCoarseMax]) = type_scores(*models.coarse, coarse, entry);
    if (models.fine) std::tie(b[kNtpFineSum], b[kNtpFineMax]) = type_scores(*models.fine, fine, entry);
    auto ir_scores = models.ir->score_answer(query, answers[i], exclude_question_id);
    std::copy(ir_scores.scores.begin(), ir_scores.scores.end(), b.begin() + kIrFirst);
  }

  QuestionExtras extras;
  extras.word_count = n_tokens;
  extras.sentence_count = n_tokens ? static_cast<std::size_t>(q.tt.tokens[n_tokens - 1].sentence_index) + 1 : 0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const auto& title = models.ir->catalog().title(answers[i]);
    Candidate c;
    c.answer = answers[i];
    c.scores = bundles[i];
    c.features = assemble_features(answers, bundles, i, extras, models.types->assign_types(title).fine.size(),
                                   answer_in_question(title, words));
    set.candidates.push_back(c);
  }
  return set;
}

}  // namespace qb::scorer
