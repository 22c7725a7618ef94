#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qb/entity_linker.h"

namespace qb::match {

struct BuzzPolicy {
  double threshold = 0.6;
  std::size_t min_words = 15;
  std::size_t stride = 1;
  bool answer_at_end = true;

  void validate() const;
};

bool should_buzz(double probability, std::size_t revealed, const BuzzPolicy& policy);

struct ScoringRules {
  int correct_points = 10;
  int interrupt_wrong_points = -5;
  int end_wrong_points = 0;
};

// Lowercase, strip diacritics, drop parenthetical qualifiers and punctuation,
// collapse whitespace. Underscores count as spaces.
std::string normalize_answer(std::string_view s);
bool judge_answer(std::string_view given, std::string_view gold, const std::vector<std::string>& aliases = {});

// A question as played: analyzed tokens plus the display word for each token.
struct MatchQuestion {
  std::string id;
  std::string gold;
  std::vector<std::string> aliases;
  linker::AnalyzedQuestion analyzed;
  std::vector<std::string> words;  // words[i] ends with token i and any trailing punctuation

  std::size_t num_words() const { return words.size(); }
};

MatchQuestion make_match_question(linker::AnalyzedQuestion q, std::string gold,
                                  std::vector<std::string> aliases = {});

struct Guess {
  std::string answer;
  double probability = 0.0;
};

// Top answer for the first n revealed words.
class Guesser {
 public:
  virtual ~Guesser() = default;
  virtual Guess guess(const MatchQuestion& q, std::size_t revealed) = 0;
};

// Replays a fixed per-word probability trace (index 0 = after word 1).
class TraceGuesser : public Guesser {
 public:
  TraceGuesser(std::string answer, std::vector<double> trace) : answer_(std::move(answer)), trace_(std::move(trace)) {}
  Guess guess(const MatchQuestion& q, std::size_t revealed) override;
  std::size_t calls() const { return calls_; }

 private:
  std::string answer_;
  std::vector<double> trace_;
  std::size_t calls_ = 0;
};

class FunctionGuesser : public Guesser {
 public:
  explicit FunctionGuesser(std::function<Guess(const MatchQuestion&, std::size_t)> fn) : fn_(std::move(fn)) {}
  Guess guess(const MatchQuestion& q, std::size_t revealed) override { return fn_(q, revealed); }

 private:
  std::function<Guess(const MatchQuestion&, std::size_t)> fn_;
};

struct TracePoint {
  std::size_t revealed = 0;
  std::string answer;
  double probability = 0.0;
};

// Engine side of one question: consults the guesser every `stride` words and
// at the final word.
class EngineBuzzer {
 public:
  EngineBuzzer(Guesser& guesser, BuzzPolicy policy) : guesser_(&guesser), policy_(policy) { policy_.validate(); }

  void reset() { trace_.clear(); }
  std::optional<Guess> step(const MatchQuestion& q, std::size_t revealed, bool locked_out);
  const std::vector<TracePoint>& trace() const { return trace_; }

 private:
  Guesser* guesser_;
  BuzzPolicy policy_;
  std::vector<TracePoint> trace_;
};

// A participant in a match.
class Player {
 public:
  virtual ~Player() = default;
  virtual void begin_question(const MatchQuestion&) {}
  // Called once per revealed word while the player may still buzz.
  virtual std::optional<Guess> on_word(const MatchQuestion& q, std::size_t revealed, bool locked_out) = 0;
  virtual std::vector<TracePoint> trace() const { return {}; }
};

class EnginePlayer : public Player {
 public:
  EnginePlayer(Guesser& guesser, BuzzPolicy policy) : buzzer_(guesser, policy) {}
  void begin_question(const MatchQuestion&) override { buzzer_.reset(); }
  std::optional<Guess> on_word(const MatchQuestion& q, std::size_t revealed, bool locked_out) override {
    return buzzer_.step(q, revealed, locked_out);
  }
  std::vector<TracePoint> trace() const override { return buzzer_.trace(); }

 private:
  EngineBuzzer buzzer_;
};

// Buzzes at a fixed word with a fixed answer, per question id.
class ScriptedPlayer : public Player {
 public:
  struct Action {
    std::size_t at_word = 0;
    std::string answer;
  };
  void script(const std::string& question_id, Action action) { actions_[question_id] = std::move(action); }
  std::optional<Guess> on_word(const MatchQuestion& q, std::size_t revealed, bool locked_out) override;

 private:
  std::map<std::string, Action> actions_;
};

struct QuestionOutcome {
  std::string question_id;
  int delta_a = 0;
  int delta_b = 0;
};

struct MatchResult {
  int score_a = 0;
  int score_b = 0;
  std::vector<QuestionOutcome> questions;
  std::vector<std::string> log;  // JSON lines
};

// Words are revealed one at a time; the first buzz answers. Simultaneous
// buzzes are ordered by a coin flip from `seed`.
MatchResult run_match(Player& a, Player& b, const std::vector<MatchQuestion>& questions, const ScoringRules& rules,
                      std::uint64_t seed);

void write_log(const std::string& path, const std::vector<std::string>& lines);

inline constexpr std::array<int, 4> kPrefixLevels = {1, 2, 3, 0};  // 0 = full question

// Tokens covered by the first k sentences (k = 0: all).
std::size_t prefix_tokens(const linker::AnalyzedQuestion& q, int k);

struct EvalRow {
  std::string name;
  std::array<double, 4> accuracy{};
  std::size_t questions = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string format() const;
};

struct EvalQuestion {
  const linker::AnalyzedQuestion* question = nullptr;
  int gold = -1;
};

// Top answer id for the first n tokens, -1 when none.
using Ranker = std::function<int(const linker::AnalyzedQuestion&, std::size_t n_tokens)>;

EvalRow evaluate(const std::vector<EvalQuestion>& questions, const Ranker& ranker, std::string name = "full");

}  // namespace qb::match
