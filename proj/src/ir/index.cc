#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "qb/error.h"
#include "qb/ir.h"

namespace qb::ir {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr char kMagic[5] = {'Q', 'B', 'I', 'X', '1'};

const std::vector<std::uint32_t> kNoDocs;

std::int64_t delta_for(const Adjustment& adj, std::uint32_t term) {
  auto it = std::lower_bound(adj.tf_delta.begin(), adj.tf_delta.end(), term,
                             [](const auto& p, std::uint32_t t) { return p.first < t; });
  return (it != adj.tf_delta.end() && it->first == term) ? it->second : 0;
}

// Collection statistics under an optional adjustment.
struct Stats {
  double n_docs;
  double avgdl;
};

Stats stats_of(const InvertedIndex& idx, const Adjustment* adj) {
  double n = static_cast<double>(idx.num_docs());
  double total = static_cast<double>(idx.total_length());
  if (adj && adj->doc >= 0) {
    if (adj->remove) n -= 1.0;
    total += static_cast<double>(adj->len_delta);
  }
  return {n, n > 0 ? total / n : 0.0};
}

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_i32(std::ostream& os, std::int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::istream& is;
  const std::string& path;

  void fail(const std::string& what) const { throw Error(path + ": " + what); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) fail("truncated index file");
    return v;
  }
  std::int32_t i32() {
    std::int32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) fail("truncated index file");
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    if (n > (1u << 28)) fail("implausible string length");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) fail("truncated index file");
    return s;
  }
};

}  // namespace

double bm25_idf(double n_docs, double df) { return std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5)); }

double bm25_term(double tf, double idf, double doc_len, double avgdl, Bm25Params p) {
  if (tf <= 0) return 0.0;
  double norm = avgdl > 0 ? doc_len / avgdl : 1.0;
  return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

InvertedIndex InvertedIndex::build(const std::vector<Document>& docs) {
  InvertedIndex idx;
  idx.forward_.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& t : docs[d].terms) {
      auto [it, inserted] = idx.term_index_.try_emplace(t, static_cast<std::uint32_t>(idx.terms_.size()));
      if (inserted) idx.terms_.push_back(t);
      ++counts[it->second];
    }
    idx.forward_[d].assign(counts.begin(), counts.end());
    idx.doc_len_.push_back(static_cast<std::uint32_t>(docs[d].terms.size()));
    idx.doc_answer_.push_back(docs[d].answer);
    idx.doc_question_.push_back(docs[d].question_id);
  }
  idx.postings_.assign(idx.terms_.size(), {});
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (auto [t, tf] : idx.forward_[d]) idx.postings_[t].push_back({static_cast<std::uint32_t>(d), tf});
  idx.finalize();
  return idx;
}

void InvertedIndex::finalize() {
  total_len_ = 0;
  answer_docs_.clear();
  question_doc_.clear();
  for (std::uint32_t d = 0; d < doc_len_.size(); ++d) {
    total_len_ += doc_len_[d];
    answer_docs_[doc_answer_[d]].push_back(d);
    if (!doc_question_[d].empty()) question_doc_.emplace(doc_question_[d], d);
  }
}

int InvertedIndex::term_id(std::string_view term) const {
  auto it = term_index_.find(std::string(term));
  return it == term_index_.end() ? -1 : static_cast<int>(it->second);
}

double InvertedIndex::avg_doc_length() const {
  return doc_len_.empty() ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(doc_len_.size());
}

std::uint32_t InvertedIndex::tf(std::uint32_t doc, std::uint32_t term) const {
  const auto& f = forward_[doc];
  auto it = std::lower_bound(f.begin(), f.end(), term, [](const auto& p, std::uint32_t t) { return p.first < t; });
  return (it != f.end() && it->first == term) ? it->second : 0;
}

const std::vector<std::uint32_t>& InvertedIndex::docs_of_answer(int answer) const {
  auto it = answer_docs_.find(answer);
  return it == answer_docs_.end() ? kNoDocs : it->second;
}

int InvertedIndex::doc_of_question(const std::string& question_id) const {
  auto it = question_doc_.find(question_id);
  return it == question_doc_.end() ? -1 : static_cast<int>(it->second);
}

std::vector<std::uint32_t> InvertedIndex::unique_query_terms(const std::vector<std::string>& query) const {
  std::vector<std::uint32_t> ids;
  for (const auto& q : query) {
    int id = term_id(q);
    if (id >= 0) ids.push_back(static_cast<std::uint32_t>(id));
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

// tf of (doc, term) and df of term as seen through the adjustment.
struct AdjustedView {
  const InvertedIndex& idx;
  const Adjustment* adj;

  bool touches(std::uint32_t doc) const { return adj && adj->doc >= 0 && static_cast<std::uint32_t>(adj->doc) == doc; }
  bool removed(std::uint32_t doc) const { return touches(doc) && adj->remove; }
  double tf(std::uint32_t doc, std::uint32_t term, std::uint32_t raw) const {
    if (!touches(doc)) return raw;
    if (adj->remove) return 0.0;
    return static_cast<double>(static_cast<std::int64_t>(raw) + delta_for(*adj, term));
  }
  double doc_len(std::uint32_t doc) const {
    double len = idx.doc_length(doc);
    return touches(doc) ? len + static_cast<double>(adj->len_delta) : len;
  }
  double df(std::uint32_t term) const {
    double df = idx.df(term);
    if (adj && adj->doc >= 0) {
      auto doc = static_cast<std::uint32_t>(adj->doc);
      std::uint32_t raw = idx.tf(doc, term);
      if (raw > 0 && (adj->remove || static_cast<std::int64_t>(raw) + delta_for(*adj, term) <= 0)) df -= 1.0;
    }
    return df;
  }
};

}  // namespace

double InvertedIndex::bm25(const std::vector<std::string>& query, std::uint32_t doc, const Adjustment* adj,
                           Bm25Params params) const {
  AdjustedView view{*this, adj};
  if (view.removed(doc)) return 0.0;
  Stats st = stats_of(*this, adj);
  double len = view.doc_len(doc);
  double score = 0.0;
  for (auto t : unique_query_terms(query)) {
    double tf = view.tf(doc, t, this->tf(doc, t));
    if (tf <= 0) continue;
    score += bm25_term(tf, bm25_idf(st.n_docs, view.df(t)), len, st.avgdl, params);
  }
  return score;
}

double InvertedIndex::common_words(const std::vector<std::string>& query, std::uint32_t doc,
                                   const Adjustment* adj) const {
  AdjustedView view{*this, adj};
  if (view.removed(doc)) return 0.0;
  double n = 0;
  for (auto t : unique_query_terms(query))
    if (view.tf(doc, t, this->tf(doc, t)) > 0) n += 1.0;
  return n;
}

std::vector<double> InvertedIndex::bm25_all(const std::vector<std::string>& query, const Adjustment* adj,
                                            Bm25Params params) const {
  AdjustedView view{*this, adj};
  Stats st = stats_of(*this, adj);
  std::vector<double> scores(num_docs(), 0.0);
  for (auto t : unique_query_terms(query)) {
    double idf = bm25_idf(st.n_docs, view.df(t));
    for (const auto& p : postings_[t]) {
      double tf = view.tf(p.doc, t, p.tf);
      if (tf <= 0) continue;
      scores[p.doc] += bm25_term(tf, idf, view.doc_len(p.doc), st.avgdl, params);
    }
  }
  if (adj && adj->doc >= 0 && adj->remove) scores[static_cast<std::size_t>(adj->doc)] = std::nan("");
  return scores;
}

Adjustment InvertedIndex::removal_of(const std::string& question_id) const {
  Adjustment adj;
  int doc = doc_of_question(question_id);
  if (doc < 0) return adj;
  adj.doc = doc;
  adj.remove = true;
  adj.len_delta = -static_cast<std::int64_t>(doc_len_[static_cast<std::size_t>(doc)]);
  for (auto [t, tf] : forward_[static_cast<std::size_t>(doc)]) adj.tf_delta.emplace_back(t, -static_cast<std::int64_t>(tf));
  return adj;
}

Adjustment InvertedIndex::subtraction(std::uint32_t doc,
                                      const std::vector<std::pair<std::string, std::uint32_t>>& counts) const {
  Adjustment adj;
  adj.doc = static_cast<int>(doc);
  std::map<std::uint32_t, std::int64_t> delta;
  for (const auto& [term, n] : counts) {
    int id = term_id(term);
    if (id < 0) throw Error("subtraction of a term absent from the index: " + term);
    delta[static_cast<std::uint32_t>(id)] -= n;
    adj.len_delta -= n;
  }
  adj.tf_delta.assign(delta.begin(), delta.end());
  for (auto [t, d] : adj.tf_delta)
    if (static_cast<std::int64_t>(tf(doc, t)) + d < 0) throw Error("subtraction exceeds document counts");
  // A document that loses all its terms would not exist in a rebuilt index.
  adj.remove = static_cast<std::int64_t>(doc_len_[doc]) + adj.len_delta == 0;
  return adj;
}

void InvertedIndex::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, static_cast<std::uint32_t>(terms_.size()));
  for (const auto& t : terms_) write_str(os, t);
  write_u32(os, static_cast<std::uint32_t>(doc_len_.size()));
  for (std::size_t d = 0; d < doc_len_.size(); ++d) {
    write_i32(os, doc_answer_[d]);
    write_u32(os, doc_len_[d]);
    write_str(os, doc_question_[d]);
  }
  for (const auto& plist : postings_) {
    write_u32(os, static_cast<std::uint32_t>(plist.size()));
    for (const auto& p : plist) {
      write_u32(os, p.doc);
      write_u32(os, p.tf);
    }
  }
  if (!os) throw Error("failed writing " + path);
}

InvertedIndex InvertedIndex::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw Error(path + ": not an index file (bad magic)");
  Reader r{is, path};
  InvertedIndex idx;
  std::uint32_t n_terms = r.u32();
  idx.terms_.reserve(n_terms);
  for (std::uint32_t i = 0; i < n_terms; ++i) {
    idx.terms_.push_back(r.str());
    if (!idx.term_index_.emplace(idx.terms_.back(), i).second) r.fail("duplicate term in dictionary");
  }
  std::uint32_t n_docs = r.u32();
  for (std::uint32_t d = 0; d < n_docs; ++d) {
    idx.doc_answer_.push_back(r.i32());
    idx.doc_len_.push_back(r.u32());
    idx.doc_question_.push_back(r.str());
  }
  idx.postings_.resize(n_terms);
  idx.forward_.resize(n_docs);
  for (std::uint32_t t = 0; t < n_terms; ++t) {
    std::uint32_t n = r.u32();
    if (n > n_docs) r.fail("posting list longer than document count");
    for (std::uint32_t i = 0; i < n; ++i) {
      std::uint32_t doc = r.u32();
      std::uint32_t tf = r.u32();
      if (doc >= n_docs) r.fail("posting refers to unknown document");
      idx.postings_[t].push_back({doc, tf});
      idx.forward_[doc].emplace_back(t, tf);
    }
  }
  std::vector<std::uint64_t> sums(n_docs, 0);
  for (std::uint32_t d = 0; d < n_docs; ++d)
    for (auto [t, tf] : idx.forward_[d]) sums[d] += tf;
  for (std::uint32_t d = 0; d < n_docs; ++d)
    if (sums[d] != idx.doc_len_[d]) r.fail("document length does not match postings");
  idx.finalize();
  return idx;
}

bool InvertedIndex::operator==(const InvertedIndex& o) const {
  if (terms_ != o.terms_ || doc_len_ != o.doc_len_ || doc_answer_ != o.doc_answer_ ||
      doc_question_ != o.doc_question_ || forward_ != o.forward_)
    return false;
  return true;
}

}  // namespace qb::ir
