#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "qb/corpus.h"
#include "qb/error.h"

namespace qb::corpus {

using nlohmann::json;

namespace {

std::string normalize_text(std::string_view text) {
  std::string folded = textproc::casefold(text);
  std::string out;
  bool space = false;
  for (char c : folded) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

AliasTable AliasTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read alias table " + path);
  AliasTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError(path, lineno, "expected alias<TAB>title");
    }
    table.add(line.substr(0, tab), line.substr(tab + 1));
  }
  return table;
}

void AliasTable::add(std::string_view alias, std::string title) {
  map_[textproc::casefold(alias)] = std::move(title);
}

const std::string* AliasTable::find(std::string_view alias) const {
  auto it = map_.find(textproc::casefold(alias));
  return it == map_.end() ? nullptr : &it->second;
}

AnswerCatalog AnswerCatalog::from_records(const std::vector<QuestionRecord>& records) {
  std::vector<std::string> titles;
  titles.reserve(records.size());
  for (const auto& r : records) titles.push_back(r.answer);
  return from_titles(std::move(titles));
}

AnswerCatalog AnswerCatalog::from_titles(std::vector<std::string> titles) {
  AnswerCatalog cat;
  for (const auto& t : titles) ++cat.counts_[t];
  std::sort(titles.begin(), titles.end());
  titles.erase(std::unique(titles.begin(), titles.end()), titles.end());
  cat.answers_ = std::move(titles);
  for (std::size_t i = 0; i < cat.answers_.size(); ++i) {
    cat.index_.emplace(cat.answers_[i], static_cast<int>(i));
  }
  return cat;
}

int AnswerCatalog::id(std::string_view title) const {
  auto it = index_.find(std::string(title));
  return it == index_.end() ? -1 : it->second;
}

int AnswerCatalog::count(std::string_view title) const {
  auto it = counts_.find(std::string(title));
  return it == counts_.end() ? 0 : it->second;
}

AnswerResolver::AnswerResolver(const AliasTable& aliases, const std::vector<std::string>* known_titles)
    : aliases_(&aliases), passthrough_(known_titles == nullptr) {
  auto add_title = [this](const std::string& t) {
    exact_.emplace(t, t);
    folded_.emplace(textproc::casefold(t), t);
  };
  if (known_titles != nullptr) {
    for (const auto& t : *known_titles) add_title(t);
  } else {
    for (const auto& [alias, title] : aliases.entries()) add_title(title);
  }
}

std::string AnswerResolver::resolve(std::string_view answer) const {
  std::string key(answer);
  if (auto it = exact_.find(key); it != exact_.end()) return it->second;
  if (auto it = folded_.find(textproc::casefold(answer)); it != folded_.end()) return it->second;
  if (const std::string* title = aliases_->find(answer)) return *title;
  return passthrough_ ? key : std::string();
}

std::vector<QuestionRecord> ingest_dataset(const std::string& path, const AliasTable& aliases,
                                           IngestReport* report,
                                           const std::vector<std::string>* known_titles) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path);
  IngestReport local;
  IngestReport& rep = report != nullptr ? *report : local;
  AnswerResolver resolver(aliases, known_titles);
  std::unordered_set<std::string> seen_ids;

  std::vector<QuestionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rep.lines;
    QuestionRecord rec;
    try {
      json j = json::parse(line);
      rec.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      rec.text = j.at("question").get<std::string>();
      rec.answer = j.at("answer").get<std::string>();
      if (j.contains("source")) rec.source = j.at("source").get<std::string>();
    } catch (const json::exception& e) {
      ++rep.malformed;
      rep.diagnostics.push_back(path + ":" + std::to_string(lineno) + ": " + e.what());
      continue;
    }
    if (rec.id.empty() || rec.text.empty() || rec.answer.empty()) {
      ++rep.malformed;
      rep.diagnostics.push_back(path + ":" + std::to_string(lineno) + ": empty field");
      continue;
    }
    if (!seen_ids.insert(rec.id).second) {
      ++rep.malformed;
      rep.diagnostics.push_back(path + ":" + std::to_string(lineno) + ": duplicate id " + rec.id);
      continue;
    }
    std::string title = resolver.resolve(rec.answer);
    if (title.empty()) {
      ++rep.unresolved;
      continue;
    }
    rec.answer = std::move(title);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : records) {
    json j = {{"id", r.id}, {"question", r.text}, {"answer", r.answer}};
    if (!r.source.empty()) j["source"] = r.source;
    out << j.dump() << '\n';
  }
}

std::vector<QuestionRecord> deduplicate(const std::vector<QuestionRecord>& records) {
  std::unordered_set<std::string> seen;
  std::vector<QuestionRecord> out;
  for (const auto& r : records) {
    if (seen.insert(normalize_text(r.text)).second) out.push_back(r);
  }
  return out;
}

std::vector<QuestionRecord> filter_rare_answers(const std::vector<QuestionRecord>& records,
                                                int min_count) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  std::unordered_map<std::string, int> counts;
  for (const auto& r : records) ++counts[r.answer];
  std::vector<QuestionRecord> out;
  for (const auto& r : records) {
    if (counts[r.answer] >= min_count) out.push_back(r);
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<QuestionRecord>& records, std::uint64_t seed) {
  if (records.size() < 10) throw Error("split_dataset needs at least 10 records");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(records.size());
  auto n_train = static_cast<std::size_t>(std::llround(0.7 * n));
  auto n_dev = static_cast<std::size_t>(std::llround(0.1 * n));
  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = records[order[i]];
    if (i < n_train) {
      split.train.push_back(r);
    } else if (i < n_train + n_dev) {
      split.dev.push_back(r);
    } else {
      split.test.push_back(r);
    }
  }
  return split;
}

std::string truncate_at(std::string_view text, const textproc::TokenizedText& tt, std::size_t n_tokens) {
  if (tt.tokens.empty() || n_tokens >= tt.tokens.size()) return std::string(text);
  if (n_tokens == 0) return {};
  return std::string(text.substr(0, tt.tokens[n_tokens - 1].char_end));
}

std::string truncate_random(const QuestionRecord& record, std::mt19937_64& rng) {
  auto tt = textproc::tokenize(record.text);
  if (tt.tokens.empty()) return record.text;
  std::uniform_int_distribution<std::size_t> dist(1, tt.tokens.size());
  return truncate_at(record.text, tt, dist(rng));
}

std::string sentence_prefix(const QuestionRecord& record, int k) {
  if (k < 1) throw Error("sentence_prefix needs k >= 1");
  auto tt = textproc::tokenize(record.text);
  if (tt.sentences.empty()) return record.text;
  auto idx = std::min<std::size_t>(static_cast<std::size_t>(k), tt.sentences.size()) - 1;
  if (idx + 1 == tt.sentences.size()) return record.text;
  return record.text.substr(0, tt.sentences[idx].end);
}

}  // namespace qb::corpus
