#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qb/corpus.h"
#include "qb/textproc.h"

namespace qb::ir {

enum class CollectionKind { kWikiPage = 0, kWikiParagraph = 1, kDatasetConcat = 2, kDatasetPerQuestion = 3 };
enum class Scorer { kBm25 = 0, kCommonWords = 1 };
enum class QueryType { kWords = 0, kWordsBigrams = 1, kNouns = 2, kProperNouns = 3 };

inline constexpr int kNumCollections = 4;
inline constexpr int kNumScorers = 2;
inline constexpr int kNumQueryTypes = 4;
inline constexpr int kNumScores = kNumCollections * kNumScorers * kNumQueryTypes;  // 32

inline constexpr std::array<CollectionKind, kNumCollections> kAllCollections = {
    CollectionKind::kWikiPage, CollectionKind::kWikiParagraph, CollectionKind::kDatasetConcat,
    CollectionKind::kDatasetPerQuestion};

constexpr int score_index(CollectionKind c, Scorer s, QueryType q) {
  return static_cast<int>(c) * kNumScorers * kNumQueryTypes + static_cast<int>(s) * kNumQueryTypes +
         static_cast<int>(q);
}
std::string_view to_string(CollectionKind c);
std::string_view to_string(Scorer s);
std::string_view to_string(QueryType q);
// e.g. "ir.wiki_page.bm25.words"
std::string score_name(int index);

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

// Non-negative idf: ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_idf(double n_docs, double df);
double bm25_term(double tf, double idf, double doc_len, double avgdl, Bm25Params p);

struct Document {
  int answer = -1;
  std::string question_id;  // dataset_per_question only
  std::vector<std::string> terms;
};

// A view of an index as if it had been rebuilt without one question: the
// affected document's term counts are shifted and it may vanish entirely.
struct Adjustment {
  int doc = -1;
  std::vector<std::pair<std::uint32_t, std::int64_t>> tf_delta;  // sorted by term id
  std::int64_t len_delta = 0;
  bool remove = false;
};

class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  using TermCounts = std::vector<std::pair<std::uint32_t, std::uint32_t>>;  // (term, tf) sorted by term

  static InvertedIndex build(const std::vector<Document>& docs);

  int term_id(std::string_view term) const;  // -1 when absent
  const std::string& term(std::uint32_t id) const { return terms_[id]; }
  std::size_t num_terms() const { return terms_.size(); }
  std::size_t num_docs() const { return doc_len_.size(); }
  double avg_doc_length() const;
  std::uint64_t total_length() const { return total_len_; }
  std::uint32_t df(std::uint32_t term) const { return static_cast<std::uint32_t>(postings_[term].size()); }
  std::uint32_t tf(std::uint32_t doc, std::uint32_t term) const;
  std::uint32_t doc_length(std::uint32_t doc) const { return doc_len_[doc]; }
  int doc_answer(std::uint32_t doc) const { return doc_answer_[doc]; }
  const std::string& doc_question(std::uint32_t doc) const { return doc_question_[doc]; }
  const std::vector<Posting>& postings(std::uint32_t term) const { return postings_[term]; }
  const TermCounts& doc_terms(std::uint32_t doc) const { return forward_[doc]; }
  const std::vector<std::uint32_t>& docs_of_answer(int answer) const;
  int doc_of_question(const std::string& question_id) const;

  // Scores of one document; `adj` applies leave-one-out statistics.
  double bm25(const std::vector<std::string>& query, std::uint32_t doc, const Adjustment* adj = nullptr,
              Bm25Params params = {}) const;
  double common_words(const std::vector<std::string>& query, std::uint32_t doc,
                      const Adjustment* adj = nullptr) const;
  // BM25 of every document (term-at-a-time); removed documents score NaN.
  std::vector<double> bm25_all(const std::vector<std::string>& query, const Adjustment* adj = nullptr,
                               Bm25Params params = {}) const;

  // Adjustment removing the document built from `question_id`.
  Adjustment removal_of(const std::string& question_id) const;
  // Adjustment subtracting `counts` (terms as strings) from `doc`.
  Adjustment subtraction(std::uint32_t doc, const std::vector<std::pair<std::string, std::uint32_t>>& counts) const;

  // Binary format: magic "QBIX1", little-endian u32 lengths, term
  // dictionary, document table, then postings.
  void save(const std::string& path) const;
  static InvertedIndex load(const std::string& path);
  bool operator==(const InvertedIndex& o) const;

 private:
  void finalize();
  std::vector<std::uint32_t> unique_query_terms(const std::vector<std::string>& query) const;

  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> term_index_;
  std::vector<std::vector<Posting>> postings_;
  std::vector<TermCounts> forward_;
  std::vector<std::uint32_t> doc_len_;
  std::vector<int> doc_answer_;
  std::vector<std::string> doc_question_;
  std::uint64_t total_len_ = 0;
  std::unordered_map<int, std::vector<std::uint32_t>> answer_docs_;
  std::unordered_map<std::string, std::uint32_t> question_doc_;
};

struct QueryBundle {
  std::array<std::vector<std::string>, kNumQueryTypes> terms;
  const std::vector<std::string>& get(QueryType q) const { return terms[static_cast<std::size_t>(q)]; }
};

QueryBundle make_query(const textproc::TokenizedText& tt, const textproc::Tagger& tagger);
QueryBundle make_query(std::string_view text);

// Document terms: ir_terms plus their bigrams.
std::vector<std::string> document_terms(std::string_view text);

struct WikiPage {
  std::string title;
  std::vector<std::string> paragraphs;
};
// Records start with a line "== Title ==", paragraphs are separated by blank lines.
std::vector<WikiPage> load_wiki(const std::string& path);

struct IRScoreVector {
  std::array<double, kNumScores> scores{};
  bool unknown_answer = false;
};

struct RankedAnswer {
  int answer = -1;
  double score = 0.0;
};

class Collections {
 public:
  static Collections build(const std::vector<WikiPage>& wiki, const std::vector<corpus::QuestionRecord>& records,
                           const corpus::AnswerCatalog& catalog);

  const InvertedIndex& index(CollectionKind c) const { return indexes_[static_cast<std::size_t>(c)]; }
  const corpus::AnswerCatalog& catalog() const { return catalog_; }
  const std::vector<std::string>& missing_pages() const { return missing_pages_; }

  // Leave-one-out view for `question_id` (nullopt when the collection does
  // not contain that question).
  std::optional<Adjustment> exclusion(CollectionKind c, const std::string& question_id) const;

  // 32 scores in the fixed layout. Multi-document collections are
  // max-reduced over the answer's documents.
  IRScoreVector score_answer(const QueryBundle& query, int answer,
                             const std::string* exclude_question_id = nullptr) const;
  IRScoreVector score_answer(const QueryBundle& query, const std::string& answer,
                             const std::string* exclude_question_id = nullptr) const;

  // Answers ranked by max-reduced BM25 of the words+bigrams query; ties by
  // ascending answer id.
  std::vector<RankedAnswer> top_answers(const QueryBundle& query, CollectionKind c, std::size_t k = 5,
                                        const std::string* exclude_question_id = nullptr) const;

  void save(const std::string& dir) const;
  static Collections load(const std::string& dir);

 private:
  std::array<InvertedIndex, kNumCollections> indexes_;
  corpus::AnswerCatalog catalog_;
  std::vector<std::string> missing_pages_;
};

}  // namespace qb::ir
