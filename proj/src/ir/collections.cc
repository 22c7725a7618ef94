#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "qb/error.h"
#include "qb/ir.h"
#include "qb/nnet.h"

namespace qb::ir {

namespace fs = std::filesystem;

std::string_view to_string(CollectionKind c) {
  switch (c) {
    case CollectionKind::kWikiPage: return "wiki_page";
    case CollectionKind::kWikiParagraph: return "wiki_paragraph";
    case CollectionKind::kDatasetConcat: return "dataset_concat";
    case CollectionKind::kDatasetPerQuestion: return "dataset_per_question";
  }
  return "?";
}

std::string_view to_string(Scorer s) { return s == Scorer::kBm25 ? "bm25" : "common_words"; }

std::string_view to_string(QueryType q) {
  switch (q) {
    case QueryType::kWords: return "words";
    case QueryType::kWordsBigrams: return "words_bigrams";
    case QueryType::kNouns: return "nouns";
    case QueryType::kProperNouns: return "proper_nouns";
  }
  return "?";
}

std::string score_name(int index) {
  if (index < 0 || index >= kNumScores) throw Error("IR score index out of range");
  auto c = static_cast<CollectionKind>(index / (kNumScorers * kNumQueryTypes));
  auto s = static_cast<Scorer>((index / kNumQueryTypes) % kNumScorers);
  auto q = static_cast<QueryType>(index % kNumQueryTypes);
  std::string name = "ir.";
  name += to_string(c);
  name += '.';
  name += to_string(s);
  name += '.';
  name += to_string(q);
  return name;
}

QueryBundle make_query(const textproc::TokenizedText& tt, const textproc::Tagger& tagger) {
  QueryBundle qb;
  auto words = textproc::ir_terms(tt);
  auto bi = textproc::bigrams(words);
  qb.terms[static_cast<std::size_t>(QueryType::kWordsBigrams)] = words;
  qb.terms[static_cast<std::size_t>(QueryType::kWordsBigrams)].insert(
      qb.terms[static_cast<std::size_t>(QueryType::kWordsBigrams)].end(), bi.begin(), bi.end());
  qb.terms[static_cast<std::size_t>(QueryType::kWords)] = std::move(words);
  qb.terms[static_cast<std::size_t>(QueryType::kNouns)] = textproc::extract_nouns(tt, tagger);
  qb.terms[static_cast<std::size_t>(QueryType::kProperNouns)] = textproc::extract_proper_nouns(tt, tagger);
  return qb;
}

QueryBundle make_query(std::string_view text) {
  static const textproc::HeuristicTagger tagger;
  return make_query(textproc::tokenize(text), tagger);
}

std::vector<std::string> document_terms(std::string_view text) {
  auto terms = textproc::ir_terms(text);
  auto bi = textproc::bigrams(terms);
  terms.insert(terms.end(), bi.begin(), bi.end());
  return terms;
}

std::vector<WikiPage> load_wiki(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<WikiPage> pages;
  std::string line, para;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!para.empty()) pages.back().paragraphs.push_back(std::move(para));
    para.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 4 && line.starts_with("==") && line.ends_with("==")) {
      if (!pages.empty()) flush();
      std::string title = line.substr(2, line.size() - 4);
      auto b = title.find_first_not_of(' ');
      auto e = title.find_last_not_of(' ');
      if (b == std::string::npos) throw ParseError(path, lineno, "empty page title");
      pages.push_back({title.substr(b, e - b + 1), {}});
      continue;
    }
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (pages.empty()) {
      if (!blank) throw ParseError(path, lineno, "text before the first page title");
      continue;
    }
    if (blank) {
      flush();
    } else {
      if (!para.empty()) para += ' ';
      para += line;
    }
  }
  if (!pages.empty()) flush();
  return pages;
}

Collections Collections::build(const std::vector<WikiPage>& wiki, const std::vector<corpus::QuestionRecord>& records,
                               const corpus::AnswerCatalog& catalog) {
  Collections col;
  col.catalog_ = catalog;
  std::unordered_map<std::string, const WikiPage*> by_title;
  for (const auto& p : wiki) by_title[p.title] = &p;

  std::vector<Document> pages, paragraphs;
  for (std::size_t a = 0; a < catalog.size(); ++a) {
    int id = static_cast<int>(a);
    auto it = by_title.find(catalog.title(id));
    Document page{id, "", {}};
    if (it == by_title.end() || it->second->paragraphs.empty()) {
      col.missing_pages_.push_back(catalog.title(id));
      paragraphs.push_back({id, "", {}});
    } else {
      for (const auto& para : it->second->paragraphs) {
        auto terms = document_terms(para);
        page.terms.insert(page.terms.end(), terms.begin(), terms.end());
        paragraphs.push_back({id, "", std::move(terms)});
      }
    }
    pages.push_back(std::move(page));
  }

  std::vector<Document> per_question, concat(catalog.size());
  for (std::size_t a = 0; a < catalog.size(); ++a) concat[a].answer = static_cast<int>(a);
  for (const auto& r : records) {
    int id = catalog.id(r.answer);
    if (id < 0) continue;
    auto terms = document_terms(r.text);
    auto& c = concat[static_cast<std::size_t>(id)].terms;
    c.insert(c.end(), terms.begin(), terms.end());
    per_question.push_back({id, r.id, std::move(terms)});
  }

  col.indexes_[static_cast<std::size_t>(CollectionKind::kWikiPage)] = InvertedIndex::build(pages);
  col.indexes_[static_cast<std::size_t>(CollectionKind::kWikiParagraph)] = InvertedIndex::build(paragraphs);
  // Answers without question text have no concatenated document.
  std::erase_if(concat, [](const Document& d) { return d.terms.empty(); });
  col.indexes_[static_cast<std::size_t>(CollectionKind::kDatasetConcat)] = InvertedIndex::build(concat);
  col.indexes_[static_cast<std::size_t>(CollectionKind::kDatasetPerQuestion)] = InvertedIndex::build(per_question);
  return col;
}

std::optional<Adjustment> Collections::exclusion(CollectionKind c, const std::string& question_id) const {
  const auto& pq = index(CollectionKind::kDatasetPerQuestion);
  int qdoc = pq.doc_of_question(question_id);
  if (qdoc < 0) return std::nullopt;
  if (c == CollectionKind::kDatasetPerQuestion) return pq.removal_of(question_id);
  if (c != CollectionKind::kDatasetConcat) return std::nullopt;
  const auto& cc = index(CollectionKind::kDatasetConcat);
  const auto& docs = cc.docs_of_answer(pq.doc_answer(static_cast<std::uint32_t>(qdoc)));
  if (docs.empty()) return std::nullopt;
  std::vector<std::pair<std::string, std::uint32_t>> counts;
  for (auto [t, tf] : pq.doc_terms(static_cast<std::uint32_t>(qdoc))) counts.emplace_back(pq.term(t), tf);
  return cc.subtraction(docs.front(), counts);
}

IRScoreVector Collections::score_answer(const QueryBundle& query, int answer,
                                        const std::string* exclude_question_id) const {
  IRScoreVector out;
  if (answer < 0 || static_cast<std::size_t>(answer) >= catalog_.size()) {
    out.unknown_answer = true;
    return out;
  }
  for (auto c : kAllCollections) {
    const auto& idx = index(c);
    std::optional<Adjustment> adj;
    if (exclude_question_id) adj = exclusion(c, *exclude_question_id);
    const Adjustment* ap = adj ? &*adj : nullptr;
    for (int s = 0; s < kNumScorers; ++s) {
      for (int q = 0; q < kNumQueryTypes; ++q) {
        const auto& terms = query.terms[static_cast<std::size_t>(q)];
        double best = 0.0;
        for (auto d : idx.docs_of_answer(answer)) {
          if (ap && ap->remove && ap->doc == static_cast<int>(d)) continue;
          double v = s == 0 ? idx.bm25(terms, d, ap) : idx.common_words(terms, d, ap);
          best = std::max(best, v);
        }
        out.scores[static_cast<std::size_t>(score_index(c, static_cast<Scorer>(s), static_cast<QueryType>(q)))] = best;
      }
    }
  }
  return out;
}

IRScoreVector Collections::score_answer(const QueryBundle& query, const std::string& answer,
                                        const std::string* exclude_question_id) const {
  return score_answer(query, catalog_.id(answer), exclude_question_id);
}

std::vector<RankedAnswer> Collections::top_answers(const QueryBundle& query, CollectionKind c, std::size_t k,
                                                   const std::string* exclude_question_id) const {
  const auto& idx = index(c);
  std::optional<Adjustment> adj;
  if (exclude_question_id) adj = exclusion(c, *exclude_question_id);
  auto doc_scores = idx.bm25_all(query.get(QueryType::kWordsBigrams), adj ? &*adj : nullptr);
  std::vector<RankedAnswer> ranked(catalog_.size());
  for (std::size_t a = 0; a < ranked.size(); ++a) ranked[a].answer = static_cast<int>(a);
  for (std::uint32_t d = 0; d < doc_scores.size(); ++d) {
    double s = doc_scores[d];
    if (std::isnan(s)) continue;
    int a = idx.doc_answer(d);
    if (a >= 0 && static_cast<std::size_t>(a) < ranked.size()) ranked[static_cast<std::size_t>(a)].score =
        std::max(ranked[static_cast<std::size_t>(a)].score, s);
  }
  k = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                    [](const RankedAnswer& x, const RankedAnswer& y) {
                      return x.score != y.score ? x.score > y.score : x.answer < y.answer;
                    });
  ranked.resize(k);
  return ranked;
}

void Collections::save(const std::string& dir) const {
  fs::create_directories(dir);
  for (auto c : kAllCollections) index(c).save((fs::path(dir) / (std::string(to_string(c)) + ".qbix")).string());
  nnet::write_lines((fs::path(dir) / "answers.txt").string(), catalog_.answers());
  nnet::write_lines((fs::path(dir) / "missing_pages.txt").string(), missing_pages_);
}

Collections Collections::load(const std::string& dir) {
  Collections col;
  for (auto c : kAllCollections)
    col.indexes_[static_cast<std::size_t>(c)] =
        InvertedIndex::load((fs::path(dir) / (std::string(to_string(c)) + ".qbix")).string());
  col.catalog_ = corpus::AnswerCatalog::from_titles(nnet::read_lines((fs::path(dir) / "answers.txt").string()));
  col.missing_pages_ = nnet::read_lines((fs::path(dir) / "missing_pages.txt").string());
  if (col.index(CollectionKind::kWikiPage).num_docs() != col.catalog_.size())
    throw Error(dir + ": index does not match its answer list");
  return col;
}

}  // namespace qb::ir
