#include "support.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>

namespace qb::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("qb_test_" + std::to_string(rd()) + "_" + std::to_string(counter.fetch_add(1)));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::write(const std::string& name, const std::string& content) const {
  auto p = path_ / name;
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
  return p.string();
}

double brute_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                  std::size_t doc, double k1, double b) {
  double n = static_cast<double>(docs.size());
  double total = 0.0;
  for (const auto& d : docs) total += static_cast<double>(d.size());
  double avgdl = total / n;
  std::set<std::string> unique(query.begin(), query.end());
  double score = 0.0;
  for (const auto& t : unique) {
    double df = 0.0;
    for (const auto& d : docs)
      if (std::find(d.begin(), d.end(), t) != d.end()) df += 1.0;
    double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), t));
    if (tf == 0.0) continue;
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double len = static_cast<double>(docs[doc].size());
    score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
  }
  return score;
}

double brute_common_words(const std::vector<std::string>& doc, const std::vector<std::string>& query) {
  std::set<std::string> unique(query.begin(), query.end());
  double n = 0.0;
  for (const auto& t : unique)
    if (std::find(doc.begin(), doc.end(), t) != doc.end()) n += 1.0;
  return n;
}

double gain_at(const gbrt::Dataset& data, const std::vector<double>& g, const std::vector<double>& h, double lambda,
               std::size_t feature, double threshold) {
  double G = 0.0, H = 0.0, gl = 0.0, hl = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    G += g[i];
    H += h[i];
    if (static_cast<double>(data.at(i, feature)) <= threshold) {
      gl += g[i];
      hl += h[i];
    }
  }
  auto score = [lambda](double gs, double hs) { return gs * gs / (hs + lambda); };
  return score(gl, hl) + score(G - gl, H - hl) - score(G, H);
}

ExhaustiveSplit exhaustive_split(const gbrt::Dataset& data, const std::vector<double>& g,
                                 const std::vector<double>& h, double lambda, int min_leaf) {
  ExhaustiveSplit out;
  for (std::size_t f = 0; f < data.cols; ++f) {
    std::set<float> values;
    for (std::size_t i = 0; i < data.rows; ++i) values.insert(data.at(i, f));
    for (auto it = values.begin(); it != values.end() && std::next(it) != values.end(); ++it) {
      double a = *it, b = *std::next(it);
      std::size_t nl = 0;
      for (std::size_t i = 0; i < data.rows; ++i)
        if (data.at(i, f) <= *it) ++nl;
      if (nl < static_cast<std::size_t>(min_leaf) || data.rows - nl < static_cast<std::size_t>(min_leaf)) continue;
      double thr = 0.5 * (a + b);
      if (!(thr < b)) thr = a;
      double gain = gain_at(data, g, h, lambda, f, thr);
      if (gain > out.best.gain) {
        out.runner_up_gain = out.best.gain;
        out.best = {static_cast<int>(f), thr, gain, nl};
      } else if (gain > out.runner_up_gain) {
        out.runner_up_gain = gain;
      }
    }
  }
  return out;
}

gbrt::Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  gbrt::Dataset d(rows, cols);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::vector<double> w(cols);
  for (auto& v : w) v = nd(rng);
  for (std::size_t i = 0; i < rows; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      // Mix of continuous and heavily tied columns.
      d.at(i, j) = j % 2 == 0 ? nd(rng) : static_cast<float>(coarse(rng));
      z += w[j] * d.at(i, j);
    }
    std::bernoulli_distribution label(1.0 / (1.0 + std::exp(-z)));
    d.y[i] = label(rng) ? 1.0f : 0.0f;
  }
  if (rows >= 2) {
    d.y[0] = 0.0f;
    d.y[1] = 1.0f;
  }
  return d;
}

SynthWorld::SynthWorld(const synth::SynthConfig& config) : corpus(synth::generate(config)) {
  for (const auto& m : corpus.mentions) dict.add(m.surface, {m.keyphraseness, m.link_probability, m.entity});
  for (const auto& [title, paths] : corpus.types) types.set(title, paths);
  split = corpus::split_dataset(corpus.records, config.seed);
  ir = ir::Collections::build(corpus.wiki, split.train, corpus::AnswerCatalog::from_records(corpus.records));
  linker::Thresholds th;
  train = pipeline::analyze_split(split.train, dict, th);
  dev = pipeline::analyze_split(split.dev, dict, th);
  test = pipeline::analyze_split(split.test, dict, th);
}

scorer::StackConfig small_stack_config() {
  auto c = pipeline::compact_config().stack_config();
  c.nqs.dim = 24;
  c.nqs.max_epochs = 10;
  c.ntp.d_word = 8;
  c.ntp.d_conv = 8;
  c.ntp.max_epochs = 4;
  c.boost.max_rounds = 150;
  c.boost.min_leaf_samples = 10;
  c.folds = 3;
  c.truncations = 2;
  return c;
}

}  // namespace qb::testing
