#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qb/match.h"

namespace qb::service {

struct ServiceOptions {
  int default_word_interval_ms = 250;
  int answer_timeout_ms = 8000;
  std::size_t questions_per_match = 5;
  match::BuzzPolicy policy;
  match::ScoringRules rules;
};

// Creates a guesser for one session's engine side.
using GuesserFactory = std::function<std::unique_ptr<match::Guesser>()>;

// Live matches over HTTP:
//   POST /match                 {"v":1,"opponent":"human"|"engine","word_interval_ms":N,"rules":{...}}
//   GET  /match/{id}/events     server-sent events from ?cursor=N (stream=0: one JSON snapshot)
//   POST /match/{id}/buzz       404 unknown session, 409 locked out or not reading
//   POST /match/{id}/answer     {"v":1,"text":"..."}
// Side "a" is the human (or a second engine), side "b" the engine.
class MatchService {
 public:
  MatchService(std::vector<match::MatchQuestion> questions, GuesserFactory guessers, ServiceOptions options);
  ~MatchService();
  MatchService(const MatchService&) = delete;
  MatchService& operator=(const MatchService&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread.
  int start(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" from $QB_BIND overrides the given defaults.
void bind_address_from_env(std::string& host, int& port);

}  // namespace qb::service
