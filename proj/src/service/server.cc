#include "qb/service.h"

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <httplib.h>
#include <json.hpp>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "qb/error.h"

namespace qb::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kWireVersion = 1;

enum class Phase { kReading, kAwaitingAnswer, kSettled };

const char* side_name(int s) { return s == 0 ? "a" : "b"; }

json trace_json(const std::vector<match::TracePoint>& trace) {
  json arr = json::array();
  for (const auto& p : trace) arr.push_back({{"revealed", p.revealed}, {"answer", p.answer}, {"p", p.probability}});
  return arr;
}

struct Session {
  std::string id;
  bool human = true;  // side a is a person
  int interval_ms = 250;
  int timeout_ms = 8000;
  match::ScoringRules rules;
  match::BuzzPolicy policy;
  const std::vector<match::MatchQuestion>* questions = nullptr;
  std::size_t n_questions = 0;
  std::array<std::unique_ptr<match::Guesser>, 2> guessers;

  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::string> events;
  bool done = false;
  bool stopping = false;

  std::size_t qi = 0;
  std::size_t revealed = 0;
  Phase phase = Phase::kReading;
  std::array<bool, 2> locked = {false, false};
  std::array<int, 2> score = {0, 0};
  Clock::time_point answer_deadline;
  std::thread runner;

  const match::MatchQuestion& question() const { return (*questions)[qi]; }

  // Caller holds mu.
  void emit(json ev) {
    ev["v"] = kWireVersion;
    ev["seq"] = events.size();
    ev["q"] = qi;
    events.push_back(ev.dump());
    cv.notify_all();
  }

  // Caller holds mu. Returns true when the answer settles the question.
  bool judge(int side, const std::string& text) {
    const auto& q = question();
    bool correct = match::judge_answer(text, q.gold, q.aliases);
    bool at_end = revealed >= q.num_words();
    int delta = correct ? rules.correct_points : at_end ? rules.end_wrong_points : rules.interrupt_wrong_points;
    score[static_cast<std::size_t>(side)] += delta;
    emit({{"type", "judgment"}, {"side", side_name(side)}, {"correct", correct}, {"delta", delta}});
    emit({{"type", "scoreboard"}, {"a", score[0]}, {"b", score[1]}});
    if (correct) {
      phase = Phase::kSettled;
    } else {
      locked[static_cast<std::size_t>(side)] = true;
      phase = Phase::kReading;
    }
    return correct;
  }

  // Sleeps one word interval; a human buzz pauses the clock until the answer
  // arrives or times out. Returns false when the session is stopping.
  bool wait_interval(std::unique_lock<std::mutex>& lk) {
    auto remaining = std::chrono::milliseconds(interval_ms);
    while (true) {
      auto deadline = Clock::now() + remaining;
      cv.wait_until(lk, deadline, [&] { return stopping || phase == Phase::kAwaitingAnswer; });
      if (stopping) return false;
      if (phase != Phase::kAwaitingAnswer) return true;
      remaining = std::max(std::chrono::milliseconds(0),
                           std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()));
      cv.wait_until(lk, answer_deadline, [&] { return stopping || phase != Phase::kAwaitingAnswer; });
      if (stopping) return false;
      if (phase == Phase::kAwaitingAnswer) {
        emit({{"type", "human_answer"}, {"side", "a"}, {"text", ""}, {"timeout", true}});
        judge(0, "");
      }
      if (phase == Phase::kSettled) return true;
    }
  }

  void run() {
    std::mt19937_64 coin(std::hash<std::string>{}(id));
    std::unique_lock lk(mu);
    for (qi = 0; qi < n_questions && !stopping; ++qi) {
      const auto& q = question();
      std::array<std::unique_ptr<match::EngineBuzzer>, 2> engines;
      for (std::size_t s = 0; s < 2; ++s)
        if (guessers[s]) engines[s] = std::make_unique<match::EngineBuzzer>(*guessers[s], policy);
      phase = Phase::kReading;
      locked = {false, false};
      revealed = 0;
      emit({{"type", "question_start"}, {"id", q.id}, {"words", q.num_words()}});
      for (std::size_t i = 1; i <= q.num_words(); ++i) {
        if (!wait_interval(lk) || phase == Phase::kSettled) break;
        revealed = i;
        emit({{"type", "reveal"}, {"index", i}, {"word", q.words[i - 1]}});
        std::array<bool, 2> lock_snapshot = locked;
        lk.unlock();
        std::vector<std::pair<int, match::Guess>> buzzes;
        for (int s = 0; s < 2; ++s) {
          auto& e = engines[static_cast<std::size_t>(s)];
          if (!e) continue;
          if (auto g = e->step(q, i, lock_snapshot[static_cast<std::size_t>(s)])) buzzes.emplace_back(s, *g);
        }
        lk.lock();
        if (stopping) break;
        // A human buzz that arrived while the engine was thinking goes first.
        if (phase == Phase::kAwaitingAnswer && !wait_interval_answer(lk)) break;
        if (buzzes.size() == 2 && (coin() & 1u)) std::swap(buzzes[0], buzzes[1]);
        for (const auto& [s, g] : buzzes) {
          if (phase == Phase::kSettled || locked[static_cast<std::size_t>(s)]) continue;
          emit({{"type", "engine_buzz"}, {"side", side_name(s)}, {"index", i}, {"answer", g.answer},
                {"probability", g.probability}});
          judge(s, g.answer);
        }
        if (phase == Phase::kSettled) break;
      }
      // Let a human still buzz after the final word.
      if (human && phase == Phase::kReading && !locked[0] && !stopping) wait_interval(lk);
      if (stopping) break;
      emit({{"type", "question_end"},
            {"id", q.id},
            {"gold", q.gold},
            {"trace_a", engines[0] ? trace_json(engines[0]->trace()) : json::array()},
            {"trace_b", engines[1] ? trace_json(engines[1]->trace()) : json::array()}});
    }
    if (qi >= n_questions) qi = n_questions ? n_questions - 1 : 0;
    emit({{"type", "match_end"}, {"a", score[0]}, {"b", score[1]}});
    done = true;
    cv.notify_all();
  }

  // Waits out a pending human answer; false when stopping.
  bool wait_interval_answer(std::unique_lock<std::mutex>& lk) {
    cv.wait_until(lk, answer_deadline, [&] { return stopping || phase != Phase::kAwaitingAnswer; });
    if (stopping) return false;
    if (phase == Phase::kAwaitingAnswer) {
      emit({{"type", "human_answer"}, {"side", "a"}, {"text", ""}, {"timeout", true}});
      judge(0, "");
    }
    return true;
  }
};

void reply(httplib::Response& res, int status, json body) {
  body["v"] = kWireVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct MatchService::Impl {
  std::vector<match::MatchQuestion> questions;
  GuesserFactory factory;
  ServiceOptions options;
  httplib::Server server;
  std::thread server_thread;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lk(mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    json body = json::object();
    if (!req.body.empty()) {
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        return reply(res, 400, {{"error", "malformed JSON"}});
      }
    }
    if (!body.is_object()) return reply(res, 400, {{"error", "body must be an object"}});
    auto s = std::make_shared<Session>();
    std::string opponent = body.value("opponent", "human");
    if (opponent != "human" && opponent != "engine") return reply(res, 400, {{"error", "opponent must be human or engine"}});
    s->human = opponent == "human";
    s->interval_ms = body.value("word_interval_ms", options.default_word_interval_ms);
    if (s->interval_ms < 0) return reply(res, 400, {{"error", "word_interval_ms must be non-negative"}});
    s->timeout_ms = body.value("answer_timeout_ms", options.answer_timeout_ms);
    s->rules = options.rules;
    if (auto r = body.find("rules"); r != body.end() && r->is_object()) {
      s->rules.correct_points = r->value("correct_points", s->rules.correct_points);
      s->rules.interrupt_wrong_points = r->value("interrupt_wrong_points", s->rules.interrupt_wrong_points);
      s->rules.end_wrong_points = r->value("end_wrong_points", s->rules.end_wrong_points);
    }
    s->policy = options.policy;
    s->questions = &questions;
    s->n_questions = std::min(questions.size(), body.value("questions", options.questions_per_match));
    if (s->n_questions == 0) return reply(res, 400, {{"error", "no questions available"}});
    s->guessers[1] = factory();
    if (!s->human) s->guessers[0] = factory();
    {
      std::lock_guard lk(mu);
      s->id = "m" + std::to_string(next_id++);
      sessions[s->id] = s;
    }
    s->runner = std::thread([s] { s->run(); });
    reply(res, 200, {{"id", s->id}, {"opponent", opponent}, {"questions", s->n_questions},
                     {"word_interval_ms", s->interval_ms}});
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return reply(res, 404, {{"error", "unknown session"}});
    std::size_t cursor = 0;
    if (req.has_param("cursor")) {
      cursor = std::strtoull(req.get_param_value("cursor").c_str(), nullptr, 10);
    } else if (req.has_header("Last-Event-ID")) {
      cursor = std::strtoull(req.get_header_value("Last-Event-ID").c_str(), nullptr, 10) + 1;
    }
    if (req.has_param("stream") && req.get_param_value("stream") == "0") {
      std::lock_guard lk(s->mu);
      json arr = json::array();
      for (std::size_t i = cursor; i < s->events.size(); ++i) arr.push_back(json::parse(s->events[i]));
      return reply(res, 200, {{"events", arr}, {"next_cursor", std::max(cursor, s->events.size())}, {"done", s->done}});
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [s, cursor](std::size_t, httplib::DataSink& sink) mutable {
      std::vector<std::string> batch;
      std::size_t first = cursor;
      bool finished = false;
      {
        std::unique_lock lk(s->mu);
        s->cv.wait_for(lk, std::chrono::milliseconds(500),
                       [&] { return s->events.size() > cursor || s->done || s->stopping; });
        for (; cursor < s->events.size(); ++cursor) batch.push_back(s->events[cursor]);
        finished = (s->done || s->stopping) && cursor >= s->events.size();
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        std::string chunk = "id: " + std::to_string(first + i) + "\ndata: " + batch[i] + "\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
      }
      if (batch.empty() && !finished) {
        static const std::string ping = ": ping\n\n";
        if (!sink.write(ping.data(), ping.size())) return false;
      }
      if (finished) sink.done();
      return true;
    });
  }

  void buzz(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return reply(res, 404, {{"error", "unknown session"}});
    std::lock_guard lk(s->mu);
    if (!s->human) return reply(res, 409, {{"error", "no human side in this match"}});
    if (s->done) return reply(res, 409, {{"error", "match is over"}});
    if (s->locked[0]) return reply(res, 409, {{"error", "locked out"}});
    if (s->phase != Phase::kReading || s->revealed == 0)
      return reply(res, 409, {{"error", "not accepting buzzes"}});
    s->phase = Phase::kAwaitingAnswer;
    s->answer_deadline = Clock::now() + std::chrono::milliseconds(s->timeout_ms);
    s->emit({{"type", "human_buzz"}, {"side", "a"}, {"index", s->revealed}});
    reply(res, 200, {{"accepted", true}, {"index", s->revealed}, {"answer_timeout_ms", s->timeout_ms}});
  }

  void answer(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return reply(res, 404, {{"error", "unknown session"}});
    std::string text;
    try {
      text = json::parse(req.body).value("text", "");
    } catch (const json::exception&) {
      return reply(res, 400, {{"error", "malformed JSON"}});
    }
    std::lock_guard lk(s->mu);
    if (s->phase != Phase::kAwaitingAnswer) return reply(res, 409, {{"error", "no buzz pending"}});
    s->emit({{"type", "human_answer"}, {"side", "a"}, {"text", text}});
    bool correct = s->judge(0, text);
    reply(res, 200, {{"correct", correct}, {"scoreboard", {{"a", s->score[0]}, {"b", s->score[1]}}}});
  }

  void routes() {
    server.Post("/match", [this](const httplib::Request& q, httplib::Response& r) { create(q, r); });
    server.Get(R"(/match/([A-Za-z0-9]+)/events)", [this](const httplib::Request& q, httplib::Response& r) { events(q, r); });
    server.Post(R"(/match/([A-Za-z0-9]+)/buzz)", [this](const httplib::Request& q, httplib::Response& r) { buzz(q, r); });
    server.Post(R"(/match/([A-Za-z0-9]+)/answer)", [this](const httplib::Request& q, httplib::Response& r) { answer(q, r); });
    server.Get("/health", [](const httplib::Request&, httplib::Response& r) { reply(r, 200, {{"ok", true}}); });
  }

  void shutdown() {
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lk(mu);
      for (auto& [id, s] : sessions) all.push_back(s);
    }
    for (auto& s : all) {
      {
        std::lock_guard lk(s->mu);
        s->stopping = true;
      }
      s->cv.notify_all();
    }
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    for (auto& s : all)
      if (s->runner.joinable()) s->runner.join();
  }
};

MatchService::MatchService(std::vector<match::MatchQuestion> questions, GuesserFactory guessers, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  options.policy.validate();
  impl_->questions = std::move(questions);
  impl_->factory = std::move(guessers);
  impl_->options = std::move(options);
  impl_->routes();
}

MatchService::~MatchService() { stop(); }

bool MatchService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int MatchService::start(const std::string& host) {
  int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw Error("cannot bind " + host);
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void MatchService::stop() {
  if (impl_) impl_->shutdown();
}

void bind_address_from_env(std::string& host, int& port) {
  const char* env = std::getenv("QB_BIND");
  if (!env || !*env) return;
  std::string v(env);
  auto colon = v.rfind(':');
  if (colon == std::string::npos) {
    host = v;
    return;
  }
  if (colon > 0) host = v.substr(0, colon);
  port = std::atoi(v.c_str() + colon + 1);
}

}  // namespace qb::service
