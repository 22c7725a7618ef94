#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qb/textproc.h"

namespace qb::corpus {

struct QuestionRecord {
  std::string id;
  std::string text;
  std::string answer;  // canonical entity title
  std::string source;
};

// Lowercased alias -> canonical title.
class AliasTable {
 public:
  static AliasTable load(const std::string& path);

  // Later entries replace earlier ones so the mapping stays functional.
  void add(std::string_view alias, std::string title);
  const std::string* find(std::string_view alias) const;
  std::size_t size() const { return map_.size(); }
  const std::unordered_map<std::string, std::string>& entries() const { return map_; }

 private:
  std::unordered_map<std::string, std::string> map_;
};

// The answer set over which the quiz solver's softmax ranges.
class AnswerCatalog {
 public:
  AnswerCatalog() = default;
  // Answers are ordered by title so ids do not depend on record order.
  static AnswerCatalog from_records(const std::vector<QuestionRecord>& records);
  static AnswerCatalog from_titles(std::vector<std::string> titles);

  int id(std::string_view title) const;  // -1 when absent
  bool contains(std::string_view title) const { return id(title) >= 0; }
  const std::string& title(int id) const { return answers_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return answers_.size(); }
  const std::vector<std::string>& answers() const { return answers_; }
  int count(std::string_view title) const;

 private:
  std::vector<std::string> answers_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, int> counts_;
};

struct IngestReport {
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::size_t unresolved = 0;  // dropped because the answer could not be canonicalized
  std::vector<std::string> diagnostics;
};

// Canonicalizes an answer: exact title, then case-insensitive title, then
// alias lookup. Returns an empty string when unresolved. Without a title
// universe the alias targets serve as titles and unmatched answers pass
// through unchanged.
class AnswerResolver {
 public:
  AnswerResolver(const AliasTable& aliases, const std::vector<std::string>* known_titles);
  std::string resolve(std::string_view answer) const;

 private:
  const AliasTable* aliases_;
  std::unordered_map<std::string, std::string> exact_;
  std::unordered_map<std::string, std::string> folded_;
  bool passthrough_ = false;
};

// Reads the JSON-lines dataset; answers are canonicalized by AnswerResolver
// against `known_titles` (e.g. the wiki page titles) when given.
std::vector<QuestionRecord> ingest_dataset(const std::string& path, const AliasTable& aliases,
                                           IngestReport* report = nullptr,
                                           const std::vector<std::string>* known_titles = nullptr);
void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records);

std::vector<QuestionRecord> deduplicate(const std::vector<QuestionRecord>& records);
std::vector<QuestionRecord> filter_rare_answers(const std::vector<QuestionRecord>& records,
                                                int min_count = 5);

struct DatasetSplit {
  std::vector<QuestionRecord> train;
  std::vector<QuestionRecord> dev;
  std::vector<QuestionRecord> test;
};

DatasetSplit split_dataset(const std::vector<QuestionRecord>& records, std::uint64_t seed);

// Prefix of `text` ending at a uniformly random token boundary in [1, N].
std::string truncate_random(const QuestionRecord& record, std::mt19937_64& rng);
std::string truncate_at(std::string_view text, const textproc::TokenizedText& tt, std::size_t n_tokens);
std::string sentence_prefix(const QuestionRecord& record, int k);

inline constexpr int kNumCoarseTypes = 8;
extern const std::array<std::string_view, kNumCoarseTypes> kCoarseTypes;

struct TypeEntry {
  std::set<std::string> fine;    // e.g. "person/author"
  std::set<std::string> coarse;  // subset of kCoarseTypes
};

// Fine type inventory plus the shipped first-segment -> coarse table.
class TypeSystem {
 public:
  static TypeSystem load(const std::string& data_dir);
  static const TypeSystem& defaults();

  const std::vector<std::string>& fine_types() const { return fine_; }
  int fine_index(std::string_view type) const;
  int coarse_index(std::string_view type) const;
  std::string coarse_of(std::string_view fine_type) const;
  // Single coarse label by the fixed priority (order of kCoarseTypes).
  int primary_coarse(const TypeEntry& entry) const;

 private:
  std::vector<std::string> fine_;
  std::unordered_map<std::string, int> fine_index_;
  std::unordered_map<std::string, std::string> segment_to_coarse_;
};

// title -> TypeEntry, loaded from `title<TAB>/type1,/type2,...`.
class TypeAssignment {
 public:
  static TypeAssignment load(const std::string& path, const TypeSystem& types = TypeSystem::defaults());

  void set(const std::string& title, const std::vector<std::string>& fine_paths,
           const TypeSystem& types = TypeSystem::defaults());
  // Unmapped titles yield an empty entry.
  const TypeEntry& assign_types(std::string_view title) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, TypeEntry> map_;
};

}  // namespace qb::corpus
