#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "qb/gbrt.h"
#include "qb/ir.h"
#include "qb/pipeline.h"
#include "qb/synth.h"

namespace qb::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const;

 private:
  std::filesystem::path path_;
};

inline constexpr char kTable1Question[] =
    "The protagonist of a novel by this author is evicted from the Bridge Inn and is talked into becoming a "
    "school janitor by a character whose role is often translated as the Council Chairman. A character created "
    "by this writer is surprised to discover that he no longer likes the taste of milk, but enjoys eating rotten "
    "food. The quest for Klamm, who resides in the title structure, is taken up by K in his novel The Castle. "
    "For 10 points, name this author who wrote about Gregor Samsa being turned into an insect in \"The "
    "Metamorphosis.\"";

// BM25 straight from the definition: document frequencies, lengths and term
// counts are recounted from the raw documents on every call.
double brute_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                  std::size_t doc, double k1 = 1.5, double b = 0.75);
// Unique query terms present in the document.
double brute_common_words(const std::vector<std::string>& doc, const std::vector<std::string>& query);

// Gain of sending rows with x[feature] <= threshold left, summed from scratch.
double gain_at(const gbrt::Dataset& data, const std::vector<double>& g, const std::vector<double>& h, double lambda,
               std::size_t feature, double threshold);

struct ExhaustiveSplit {
  gbrt::SplitCandidate best;
  double runner_up_gain = 0.0;
};
// Every feature and every distinct-value boundary, each gain recomputed.
ExhaustiveSplit exhaustive_split(const gbrt::Dataset& data, const std::vector<double>& g,
                                 const std::vector<double>& h, double lambda, int min_leaf);

gbrt::Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

// A generated corpus with its dictionary, types, split and IR collections
// built in memory (collections from the training split).
struct SynthWorld {
  synth::SynthCorpus corpus;
  linker::MentionDictionary dict;
  corpus::TypeAssignment types;
  corpus::DatasetSplit split;
  ir::Collections ir;
  pipeline::AnalyzedSplit train, dev, test;

  explicit SynthWorld(const synth::SynthConfig& config);
  const corpus::AnswerCatalog& catalog() const { return ir.catalog(); }
};

// Small models and short schedules for fixtures.
scorer::StackConfig small_stack_config();

}  // namespace qb::testing
