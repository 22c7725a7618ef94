#include "qb/match.h"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <random>

#include "qb/error.h"

namespace qb::match {

using nlohmann::json;

void BuzzPolicy::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error("buzz threshold must lie in (0, 1)");
  if (stride < 1) throw Error("buzz stride must be at least 1");
}

bool should_buzz(double probability, std::size_t revealed, const BuzzPolicy& policy) {
  return revealed >= policy.min_words && probability > policy.threshold;
}

namespace {

// Lowercase ASCII base letters for U+0100..U+017F; '1' and '2' mark the
// ligatures ij and oe.
constexpr std::string_view kLatinExtA =
    "aaaaaa" "cccccccc" "dddd" "eeeeeeeeee" "gggggggg" "hhhh" "iiiiiiiiii" "11" "jj" "kkk" "llllllllll"
    "nnnnnnnnn" "oooooo" "22" "rrrrrr" "ssssssss" "tttttt" "uuuuuuuuuuuu" "ww" "yyy" "zzzzzz" "s";
static_assert(kLatinExtA.size() == 128);

// Latin-1 letters U+00C0..U+00FF.
constexpr std::array<std::string_view, 64> kLatin1 = {
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", " ", "o", "u", "u", "u", "u", "y", "th", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", " ", "o", "u", "u", "u", "u", "y", "th", "y"};

// Decodes one UTF-8 sequence; invalid bytes decode as themselves.
char32_t decode(std::string_view s, std::size_t& i) {
  auto c = static_cast<unsigned char>(s[i]);
  int len = c < 0x80 ? 1 : (c >> 5) == 6 ? 2 : (c >> 4) == 14 ? 3 : (c >> 3) == 30 ? 4 : 1;
  if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
  char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
  for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
  i += static_cast<std::size_t>(len);
  return cp;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string folded;
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = decode(s, i);
    if (cp < 0x80) {
      auto c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
      folded.push_back(c);
    } else if (cp >= 0xC0 && cp <= 0xFF) {
      folded += kLatin1[cp - 0xC0];
    } else if (cp >= 0x100 && cp <= 0x17F) {
      char b = kLatinExtA[cp - 0x100];
      folded += b == '1' ? "ij" : b == '2' ? "oe" : std::string(1, b);
    } else if (cp >= 0x300 && cp <= 0x36F) {
      // combining marks
    } else {
      folded.push_back(' ');
    }
  }
  std::string out;
  int depth = 0;
  bool space = false;
  for (char c : folded) {
    if (c == '(') {
      ++depth;
      space = true;
      continue;
    }
    if (c == ')') {
      depth = std::max(0, depth - 1);
      space = true;
      continue;
    }
    if (depth > 0) continue;
    bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (c == '\'') continue;
    if (!word) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

bool judge_answer(std::string_view given, std::string_view gold, const std::vector<std::string>& aliases) {
  std::string g = normalize_answer(given);
  if (g.empty()) return false;
  if (g == normalize_answer(gold)) return true;
  return std::any_of(aliases.begin(), aliases.end(), [&](const std::string& a) { return g == normalize_answer(a); });
}

MatchQuestion make_match_question(linker::AnalyzedQuestion q, std::string gold, std::vector<std::string> aliases) {
  MatchQuestion m;
  m.id = q.id;
  m.gold = std::move(gold);
  m.aliases = std::move(aliases);
  const auto& toks = q.tt.tokens;
  const std::string& text = q.text;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::size_t begin = i == 0 ? 0 : toks[i].char_offset;
    std::size_t end = i + 1 < toks.size() ? toks[i + 1].char_offset : text.size();
    std::string w = text.substr(begin, end - begin);
    auto b = w.find_first_not_of(" \t\r\n");
    auto e = w.find_last_not_of(" \t\r\n");
    m.words.push_back(b == std::string::npos ? std::string() : w.substr(b, e - b + 1));
  }
  m.analyzed = std::move(q);
  return m;
}

Guess TraceGuesser::guess(const MatchQuestion&, std::size_t revealed) {
  ++calls_;
  if (trace_.empty() || revealed == 0) return {answer_, 0.0};
  return {answer_, trace_[std::min(revealed, trace_.size()) - 1]};
}

std::optional<Guess> EngineBuzzer::step(const MatchQuestion& q, std::size_t revealed, bool locked_out) {
  if (locked_out) return std::nullopt;
  bool at_end = revealed >= q.num_words();
  if (revealed % policy_.stride != 0 && !at_end) return std::nullopt;
  Guess g = guesser_->guess(q, revealed);
  trace_.push_back({revealed, g.answer, g.probability});
  if (should_buzz(g.probability, revealed, policy_)) return g;
  if (at_end && policy_.answer_at_end) return g;
  return std::nullopt;
}

std::optional<Guess> ScriptedPlayer::on_word(const MatchQuestion& q, std::size_t revealed, bool locked_out) {
  if (locked_out) return std::nullopt;
  auto it = actions_.find(q.id);
  if (it == actions_.end()) return std::nullopt;
  std::size_t at = std::min(std::max<std::size_t>(it->second.at_word, 1), q.num_words());
  if (revealed != at) return std::nullopt;
  return Guess{it->second.answer, 1.0};
}

namespace {

const char* side_name(int s) { return s == 0 ? "a" : "b"; }

json trace_json(const std::vector<TracePoint>& trace) {
  json arr = json::array();
  for (const auto& p : trace) arr.push_back({{"revealed", p.revealed}, {"answer", p.answer}, {"p", p.probability}});
  return arr;
}

}  // namespace

MatchResult run_match(Player& a, Player& b, const std::vector<MatchQuestion>& questions, const ScoringRules& rules,
                      std::uint64_t seed) {
  if (questions.empty()) throw Error("run_match needs at least one question");
  std::mt19937_64 rng(seed);
  MatchResult result;
  std::array<Player*, 2> players = {&a, &b};
  std::array<int, 2> totals = {0, 0};
  std::uint64_t seq = 0;
  auto emit = [&](json ev) {
    ev["v"] = 1;
    ev["seq"] = seq++;
    result.log.push_back(ev.dump());
  };

  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const MatchQuestion& q = questions[qi];
    for (auto* p : players) p->begin_question(q);
    std::array<bool, 2> locked = {false, false};
    std::array<int, 2> delta = {0, 0};
    bool settled = false;
    std::size_t n = q.num_words();
    for (std::size_t i = 1; i <= n && !settled; ++i) {
      emit({{"type", "reveal"}, {"q", qi}, {"index", i}, {"word", q.words[i - 1]}});
      std::vector<std::pair<int, Guess>> buzzes;
      for (int s = 0; s < 2; ++s) {
        auto g = players[static_cast<std::size_t>(s)]->on_word(q, i, locked[static_cast<std::size_t>(s)]);
        if (g && !locked[static_cast<std::size_t>(s)]) buzzes.emplace_back(s, *g);
      }
      if (buzzes.size() == 2 && (rng() & 1u)) std::swap(buzzes[0], buzzes[1]);
      for (const auto& [s, g] : buzzes) {
        if (settled) break;
        auto si = static_cast<std::size_t>(s);
        emit({{"type", "buzz"}, {"q", qi}, {"side", side_name(s)}, {"index", i}});
        emit({{"type", "answer"}, {"q", qi}, {"side", side_name(s)}, {"text", g.answer}});
        bool correct = judge_answer(g.answer, q.gold, q.aliases);
        int d = correct ? rules.correct_points : (i == n ? rules.end_wrong_points : rules.interrupt_wrong_points);
        delta[si] += d;
        totals[si] += d;
        emit({{"type", "judge"}, {"q", qi}, {"side", side_name(s)}, {"correct", correct}, {"delta", d}});
        emit({{"type", "score"}, {"q", qi}, {"a", totals[0]}, {"b", totals[1]}});
        if (correct)
          settled = true;
        else
          locked[si] = true;
      }
    }
    emit({{"type", "question_end"},
          {"q", qi},
          {"id", q.id},
          {"gold", q.gold},
          {"trace_a", trace_json(a.trace())},
          {"trace_b", trace_json(b.trace())}});
    result.questions.push_back({q.id, delta[0], delta[1]});
  }
  result.score_a = totals[0];
  result.score_b = totals[1];
  return result;
}

void write_log(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace qb::match
