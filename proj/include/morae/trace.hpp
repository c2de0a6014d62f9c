#pragma once

// Append-only session traces and deterministic replay.
//
// A trace is a JSON-lines file, one TraceEvent per line, seq numbered from 0
// without gaps. The same log object serves live readers (event stream) and
// is what `replay_trace` consumes after the fact.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "morae/agent_loop.hpp"
#include "morae/environment.hpp"
#include "morae/errors.hpp"
#include "morae/gateway.hpp"

namespace morae {

struct TraceEvent {
  std::string sessionId;
  std::int64_t seq = 0;
  std::string kind;
  Json payload;
  std::int64_t timestamp = 0;
};

inline Json to_json(const TraceEvent& e) {
  return {{"sessionId", e.sessionId}, {"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}, {"timestamp", e.timestamp}};
}

inline TraceEvent event_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("seq") || !j["seq"].is_number_integer() || !j.contains("kind") ||
      !j["kind"].is_string())
    throw IntegrityError("trace line is not an event");
  TraceEvent e;
  e.sessionId = j.value("sessionId", std::string());
  e.seq = j["seq"].get<std::int64_t>();
  e.kind = j["kind"].get<std::string>();
  e.payload = j.value("payload", Json::object());
  e.timestamp = j.value("timestamp", std::int64_t{0});
  return e;
}

// One writer, many readers. Events are kept in memory for streaming and,
// when a path is given, appended to a JSON-lines file.
class EventLog {
 public:
  explicit EventLog(std::string sessionId, std::filesystem::path file = {})
      : sessionId_(std::move(sessionId)), path_(std::move(file)) {
    if (!path_.empty()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
      if (fd_ < 0) throw SetupError("cannot open trace file " + path_.string());
    }
  }
  ~EventLog() {
    if (fd_ >= 0) {
      ::fsync(fd_);
      ::close(fd_);
    }
  }
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  std::int64_t append(const std::string& kind, Json payload) {
    std::lock_guard lock(mu_);
    TraceEvent e{sessionId_, static_cast<std::int64_t>(events_.size()), kind, std::move(payload), now_ms()};
    if (fd_ >= 0) {
      auto line = to_json(e).dump() + "\n";
      const char* p = line.data();
      std::size_t left = line.size();
      while (left > 0) {
        auto n = ::write(fd_, p, left);
        if (n < 0) throw SetupError("trace write failed for " + path_.string());
        p += n;
        left -= static_cast<std::size_t>(n);
      }
    }
    events_.push_back(std::move(e));
    cv_.notify_all();
    return events_.back().seq;
  }

  // Flushes the file to stable storage (called at pauses and at the end).
  void sync() {
    std::lock_guard lock(mu_);
    if (fd_ >= 0) ::fsync(fd_);
  }

  std::vector<TraceEvent> since(std::int64_t fromSeq) const {
    std::lock_guard lock(mu_);
    std::vector<TraceEvent> out;
    for (auto i = std::max<std::int64_t>(fromSeq, 0); i < static_cast<std::int64_t>(events_.size()); ++i)
      out.push_back(events_[static_cast<std::size_t>(i)]);
    return out;
  }

  // Blocks until an event with seq >= fromSeq exists or the timeout passes.
  std::vector<TraceEvent> wait(std::int64_t fromSeq, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || static_cast<std::int64_t>(events_.size()) > fromSeq; });
    std::vector<TraceEvent> out;
    for (auto i = std::max<std::int64_t>(fromSeq, 0); i < static_cast<std::int64_t>(events_.size()); ++i)
      out.push_back(events_[static_cast<std::size_t>(i)]);
    return out;
  }

  // Wakes blocked readers for good (service shutdown).
  void close_readers() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  std::int64_t size() const {
    std::lock_guard lock(mu_);
    return static_cast<std::int64_t>(events_.size());
  }
  const std::string& session_id() const { return sessionId_; }
  const std::filesystem::path& path() const { return path_; }

  EventSink sink() {
    return [this](const std::string& kind, Json payload) { append(kind, std::move(payload)); };
  }

 private:
  std::string sessionId_;
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<TraceEvent> events_;
  bool closed_ = false;
};

// Reads a trace file; a gap in seq or an unparseable line is an IntegrityError.
inline std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open trace " + path.string());
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error&) {
      throw IntegrityError("trace line " + std::to_string(lineNo) + " is truncated or corrupt");
    }
    auto e = event_from_json(j);
    if (e.seq != static_cast<std::int64_t>(events.size()))
      throw IntegrityError("trace seq jumps from " + std::to_string(static_cast<std::int64_t>(events.size()) - 1) +
                           " to " + std::to_string(e.seq));
    events.push_back(std::move(e));
  }
  return events;
}

// ---------------------------------------------------------------------------
// Replay

// Serves the observations a trace recorded and checks that the replayed loop
// takes the same actions.
class TraceEnvironment : public Environment {
 public:
  TraceEnvironment(std::vector<Observation> observations, std::vector<ActionDirective> actions)
      : observations_(std::move(observations)), actions_(std::move(actions)) {}

  Observation observe() override {
    if (nextObservation_ >= observations_.size()) throw EnvironmentError("trace has no more recorded observations");
    return observations_[nextObservation_++];
  }

  ExecutedAction execute(const ActionDirective& directive, int stepIndex) override {
    if (nextAction_ >= actions_.size() || !(actions_[nextAction_] == directive))
      throw DivergenceError("replay took " + render_action(directive) + ", trace recorded " +
                            (nextAction_ < actions_.size() ? render_action(actions_[nextAction_]) : "nothing"));
    ++nextAction_;
    return {directive, stepIndex, "replayed", now_ms(), cue_for(directive)};
  }

  void reset() override { nextObservation_ = nextAction_ = 0; }

 private:
  std::vector<Observation> observations_;
  std::vector<ActionDirective> actions_;
  std::size_t nextObservation_ = 0;
  std::size_t nextAction_ = 0;
};

struct ReplayResult {
  std::vector<DecisionKind> recorded;
  std::vector<DecisionKind> replayed;
  LoopStatus status = LoopStatus::Idle;
  bool matches() const { return recorded == replayed; }
};

// Re-runs every task in `events` against its own recorded model replies and
// page observations, feeding back recorded clarifications and confirmations.
inline ReplayResult replay_events(const std::vector<TraceEvent>& events) {
  ReplayResult result;
  for (std::size_t i = 0; i < events.size(); ++i)
    if (events[i].seq != static_cast<std::int64_t>(i)) throw IntegrityError("trace seq has a gap at " + std::to_string(i));

  // Split into tasks at each command event.
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].kind == "command") {
      if (!tasks.empty()) tasks.back().second = i;
      tasks.emplace_back(i, events.size());
    }
  }

  for (auto [begin, end] : tasks) {
    const auto& cmd = events[begin].payload;
    Json script = Json::array();
    std::vector<Observation> observations;
    std::vector<ActionDirective> actions;
    std::vector<Json> interventions;
    for (auto i = begin + 1; i < end; ++i) {
      const auto& e = events[i];
      const auto& p = e.payload;
      if (p.value("call", false)) {
        script.push_back({{"template", p.at("template")}, {"step", p.at("step")}, {"response", p.at("response")}});
        if (e.kind == "plan") {
          Observation o{simplified_from_json(p.at("observation")), std::nullopt};
          if (p.contains("screenshot") && p["screenshot"].is_string()) o.screenshotRef = p["screenshot"].get<std::string>();
          observations.push_back(std::move(o));
        }
      } else if (e.kind == "decision") {
        auto k = decision_kind_from(p.at("kind").get<std::string>());
        if (!k) throw IntegrityError("unknown decision kind in trace");
        result.recorded.push_back(*k);
      } else if (e.kind == "action") {
        actions.push_back(action_from_json(p.at("action"), "$.payload.action"));
      } else if (e.kind == "clarification") {
        interventions.push_back(p);
      }
    }

    ScriptedMock mock(std::make_shared<const MockScript>(MockScript::from_json(script)));
    TraceEnvironment env(std::move(observations), std::move(actions));
    auto strategy = strategy_from(cmd.value("strategy", std::string("verify-plan")));
    LoopOptions options;
    options.maxSteps = 1 << 20;
    AgentLoop loop(mock, env, strategy, options);
    std::optional<std::string> reader;
    if (cmd.contains("screenReader") && cmd["screenReader"].is_string()) reader = cmd["screenReader"].get<std::string>();
    loop.start(cmd.value("text", std::string()), reader);
    std::size_t nextIntervention = 0;
    while (true) {
      loop.run();
      if (!loop.paused() || nextIntervention >= interventions.size()) break;
      const auto& iv = interventions[nextIntervention++];
      if (iv.contains("confirm")) {
        if (loop.status() != LoopStatus::PausedConfirm) break;
        loop.confirm(iv["confirm"].get<bool>());
      } else {
        if (loop.status() != LoopStatus::PausedClarify) break;
        auto response = response_from_json(iv.at("response"));
        // Forms get fresh ids on every build; point the answer at this one.
        response.formId = loop.pending_form()->formId;
        loop.resume(response);
      }
    }
    for (const auto& d : loop.decisions()) result.replayed.push_back(d.kind);
    result.status = loop.status();
  }
  return result;
}

inline ReplayResult replay_trace(const std::filesystem::path& path) { return replay_events(read_trace(path)); }

}  // namespace morae
