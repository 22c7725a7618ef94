#include "qb/synth.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "qb/error.h"

namespace qb::synth {

namespace {

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                        "br", "dr", "gl", "kr", "pl", "st", "tr", "sk"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr std::string_view kCodas[] = {"", "", "", "n", "r", "l", "s", "k", "m"};
constexpr std::string_view kNounSuffixes[] = {"tion", "ment", "ness", "ity", "ism"};

const std::vector<std::vector<std::string>> kTypePool = {
    {"/person", "/person/author"},
    {"/person", "/person/politician"},
    {"/person", "/person/artist"},
    {"/location", "/location/city"},
    {"/location", "/location/country"},
    {"/organization", "/organization/company"},
    {"/art", "/art/film"},
    {"/written_work"},
    {"/event", "/event/military_conflict"},
    {"/product", "/product/instrument"},
    {"/building", "/building/theater"},
    {"/disease"},
};

class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(&rng) {}

  // A fresh lowercase pseudo-word whose stem is unused so far.
  std::string make(bool noun_suffix = false) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::string w;
      int syllables = pick(2) + 2;
      for (int s = 0; s < syllables; ++s) {
        w += kOnsets[pick(std::size(kOnsets))];
        w += kVowels[pick(std::size(kVowels))];
      }
      w += kCodas[pick(std::size(kCodas))];
      if (noun_suffix) w += kNounSuffixes[pick(std::size(kNounSuffixes))];
      if (textproc::Resources::defaults().is_stopword(w)) continue;
      if (stems_.insert(textproc::stem(w)).second) return w;
    }
    throw Error("synthetic vocabulary exhausted");
  }

  std::string make_name() {
    std::string w = make();
    w[0] = static_cast<char>(w[0] - 32);
    return w;
  }

 private:
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(*rng_); }

  std::mt19937_64* rng_;
  std::set<std::string> stems_;
};

struct AnswerSpec {
  std::string title;
  std::string alias;
  std::vector<std::string> clues;
  std::vector<std::string> entities;
  std::size_t type = 0;
};

}  // namespace

SynthCorpus generate(const SynthConfig& config) {
  if (config.answers == 0 || config.questions_per_answer == 0 || config.sentences == 0)
    throw Error("synthetic corpus needs answers, questions and sentences");
  std::mt19937_64 rng(config.seed);
  WordMaker maker(rng);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> noise(config.noise_words);
  for (auto& w : noise) w = maker.make(unit(rng) < 0.2);
  std::vector<std::vector<std::string>> cues(kTypePool.size());
  for (auto& c : cues)
    for (int k = 0; k < 3; ++k) c.push_back(maker.make());

  std::vector<AnswerSpec> answers(config.answers);
  for (std::size_t a = 0; a < answers.size(); ++a) {
    auto& s = answers[a];
    s.alias = maker.make_name();
    s.title = maker.make_name() + " " + s.alias;
    for (std::size_t k = 0; k < config.clue_words; ++k) s.clues.push_back(maker.make(unit(rng) < 0.35));
    for (std::size_t k = 0; k < config.related_entities; ++k) s.entities.push_back(maker.make_name() + " " + maker.make_name());
    s.type = a % kTypePool.size();
  }

  SynthCorpus out;
  auto sentence = [&](const AnswerSpec& s, double rate, std::size_t n_words, bool mention) {
    std::string text = "This " + cues[s.type][pick(3)];
    std::size_t at = mention ? 1 + pick(n_words) : n_words + 1;
    for (std::size_t w = 0; w < n_words; ++w) {
      if (w == at) text += " " + s.entities[pick(s.entities.size())];
      text += ' ';
      text += unit(rng) < rate ? s.clues[pick(s.clues.size())] : noise[pick(noise.size())];
    }
    return text + ".";
  };

  for (std::size_t a = 0; a < answers.size(); ++a) {
    const auto& s = answers[a];
    for (std::size_t q = 0; q < config.questions_per_answer; ++q) {
      std::string text;
      for (std::size_t k = 0; k < config.sentences; ++k) {
        double t = config.sentences > 1 ? static_cast<double>(k) / static_cast<double>(config.sentences - 1) : 1.0;
        double rate = config.first_clue_rate + t * (config.last_clue_rate - config.first_clue_rate);
        if (!text.empty()) text += ' ';
        text += sentence(s, rate, config.words_per_sentence, unit(rng) < 0.5);
      }
      char id[32];
      std::snprintf(id, sizeof id, "syn%03zu_%03zu", a, q);
      double form = unit(rng);
      std::string given = form < 0.05 ? textproc::casefold(s.title) : form < 0.10 ? s.alias : s.title;
      out.records.push_back({id, text, given, "synthetic"});
    }
    ir::WikiPage page{s.title, {}};
    for (int p = 0; p < 3; ++p) {
      std::string para = s.title + " is";
      for (int k = 0; k < 2; ++k) para += " " + sentence(s, 0.5, 14, true);
      page.paragraphs.push_back(para);
    }
    out.wiki.push_back(std::move(page));
    for (const auto& e : s.entities) out.mentions.push_back({e, 0.3, 0.97, e});
    out.types.emplace_back(s.title, kTypePool[s.type]);
    out.aliases.emplace_back(s.alias, s.title);
  }
  // Ambiguous phrases that fail the link-probability threshold.
  for (int k = 0; k < 10; ++k) {
    std::string e = maker.make_name() + " " + maker.make_name();
    out.mentions.push_back({noise[pick(noise.size())], 0.05, 0.4, e});
  }
  std::shuffle(out.records.begin(), out.records.end(), rng);
  return out;
}

void write_corpus(const std::string& dir, const SynthCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw Error("cannot write " + (fs::path(dir) / name).string());
    return os;
  };
  corpus::write_dataset((fs::path(dir) / "dataset.jsonl").string(), corpus.records);
  auto wiki = open("wiki.txt");
  for (const auto& p : corpus.wiki) {
    wiki << "== " << p.title << " ==\n";
    for (const auto& para : p.paragraphs) wiki << para << "\n\n";
  }
  auto mentions = open("mentions.tsv");
  for (const auto& m : corpus.mentions)
    mentions << m.surface << '\t' << m.keyphraseness << '\t' << m.link_probability << '\t' << m.entity << '\n';
  auto types = open("types.tsv");
  for (const auto& [title, paths] : corpus.types) {
    types << title << '\t';
    for (std::size_t i = 0; i < paths.size(); ++i) types << (i ? "," : "") << paths[i];
    types << '\n';
  }
  auto aliases = open("aliases.tsv");
  for (const auto& [alias, title] : corpus.aliases) aliases << alias << '\t' << title << '\n';
}

}  // namespace qb::synth
