#pragma once

// Session lifecycle for the local service: one agent loop, one environment,
// one trace and one worker thread per session.
//
// Handlers only touch the loop while it is idle or paused; the worker only
// advances it while it is running. The published state (under mu_) is what
// decides who may act.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>

#include "morae/agent_loop.hpp"
#include "morae/assist.hpp"
#include "morae/environment.hpp"
#include "morae/errors.hpp"
#include "morae/trace.hpp"

namespace morae {

// 26 characters of Crockford base32: 48 bits of milliseconds, 80 random bits.
inline std::string new_session_id() {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::uint64_t hi, lo;
  {
    std::lock_guard lock(mu);
    hi = rng();
    lo = rng();
  }
  const auto ms = static_cast<std::uint64_t>(now_ms());
  std::string id(26, '0');
  for (int i = 9; i >= 0; --i) id[static_cast<std::size_t>(9 - i)] = kAlphabet[(ms >> (5 * i)) & 31];
  // 80 random bits: 16 from hi, 64 from lo.
  for (int i = 0; i < 16; ++i) {
    const int bit = 75 - 5 * i;
    std::uint64_t v;
    if (bit >= 64) v = (hi >> (bit - 64)) & 31;
    else if (bit + 5 <= 64) v = (lo >> bit) & 31;
    else v = ((lo >> bit) | (hi << (64 - bit))) & 31;
    id[static_cast<std::size_t>(10 + i)] = kAlphabet[v];
  }
  return id;
}

struct SessionRequest {
  std::string strategy = "verify-plan";
  std::string fixture;
  // Scripted-mock task filter.
  std::string task;
  std::optional<std::string> screenReader;
  int maxSteps = 20;
  bool autoConfirm = false;
  Json extra = Json::object();

  static SessionRequest from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("$", "session request must be an object");
    SessionRequest r;
    auto str = [&](const char* k, std::string& out) {
      if (auto it = j.find(k); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ParseError(std::string("$.") + k, "expected a string");
        out = it->get<std::string>();
      }
    };
    str("strategy", r.strategy);
    str("fixture", r.fixture);
    str("task", r.task);
    std::string reader;
    str("screenReader", reader);
    if (!reader.empty()) r.screenReader = reader;
    if (auto it = j.find("maxSteps"); it != j.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<int>() < 1) throw ParseError("$.maxSteps", "expected a positive integer");
      r.maxSteps = it->get<int>();
    }
    if (auto it = j.find("autoConfirm"); it != j.end() && it->is_boolean()) r.autoConfirm = it->get<bool>();
    r.extra = j;
    return r;
  }
};

using GatewayFactory = std::function<std::shared_ptr<ModelClient>(const SessionRequest&)>;
using EnvironmentFactory = std::function<std::unique_ptr<Environment>(const SessionRequest&)>;

struct ServiceOptions {
  std::filesystem::path traceDir;
  std::filesystem::path fixtureDir;
  // Unset: a clarification waits forever.
  std::optional<std::chrono::milliseconds> clarifyTimeout;
  GatewayFactory gateway;
  // Optional second model for the final-screenshot check.
  GatewayFactory verifier;
  // Defaults to a replay environment over request.fixture.
  EnvironmentFactory environment;
};

class Session {
 public:
  Session(std::string id, SessionRequest request, std::unique_ptr<Environment> env, std::shared_ptr<ModelClient> gateway,
          std::shared_ptr<ModelClient> verifier, std::filesystem::path tracePath,
          std::optional<std::chrono::milliseconds> clarifyTimeout)
      : id_(std::move(id)),
        request_(std::move(request)),
        strategy_(strategy_from(request_.strategy)),
        env_(std::move(env)),
        gateway_(std::move(gateway)),
        verifier_(std::move(verifier)),
        log_(id_, std::move(tracePath)),
        loop_(*gateway_, *env_, strategy_, LoopOptions{request_.maxSteps, 3, request_.autoConfirm, {}}, log_.sink()),
        clarifyTimeout_(clarifyTimeout) {
    worker_ = std::thread([this] { work(); });
  }

  ~Session() { stop(); }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  EventLog& log() { return log_; }

  LoopStatus state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  Json status() const {
    std::lock_guard lock(mu_);
    Json j{{"sessionId", id_},
           {"state", std::string(to_string(state_))},
           {"strategy", std::string(to_string(strategy_.kind))},
           {"held", held_},
           {"events", log_.size()},
           {"pendingForm", pendingForm_},
           {"pendingAction", pendingAction_}};
    if (pausedAt_) j["pausedAt"] = *pausedAt_;
    if (!error_.empty()) j["error"] = error_;
    return j;
  }

  // Routes the text: questions get a guidance event, commands start the loop.
  QueryClass submit_command(const std::string& text) {
    std::lock_guard lock(mu_);
    ensure_open();
    if (state_ == LoopStatus::Running || state_ == LoopStatus::PausedClarify || state_ == LoopStatus::PausedConfirm)
      throw BusyError("session " + id_ + " is " + std::string(to_string(state_)));
    const auto cls = classify_query(text, *gateway_);
    if (cls == QueryClass::UIQuestion) {
      StepContext ctx = loop_.context();
      ctx.screenReader = request_.screenReader;
      ctx.observation = env_->observe();
      auto answer = answer_ui_question(text, ctx, *gateway_);
      loop_.note("guidance", {{"question", text}, {"answer", answer}});
      return cls;
    }
    loop_.start(text, request_.screenReader);
    publish();
    cv_.notify_all();
    return cls;
  }

  // `{"confirm": bool}` for a held side effect, otherwise a form response.
  void submit_clarification(const Json& body) {
    std::lock_guard lock(mu_);
    ensure_open();
    if (body.is_object() && body.contains("confirm")) {
      if (state_ != LoopStatus::PausedConfirm) throw StateError("session " + id_ + " is not waiting for a confirmation");
      if (!body["confirm"].is_boolean()) throw ParseError("$.confirm", "expected a boolean");
      loop_.confirm(body["confirm"].get<bool>());
    } else {
      if (state_ != LoopStatus::PausedClarify) throw StateError("session " + id_ + " is not waiting for a clarification");
      loop_.resume(response_from_json(body));
    }
    settle_locked();
    cv_.notify_all();
  }

  // Manual pause takes effect at the next step boundary.
  void control(const std::string& action) {
    std::lock_guard lock(mu_);
    if (action == "pause") held_ = true;
    else if (action == "resume") held_ = false;
    else throw ParseError("$.action", "expected pause or resume");
    log_.append("control", {{"action", action}});
    cv_.notify_all();
  }

  // Blocks until the loop is not running (or is held), or the timeout passes.
  LoopStatus wait_settled(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return state_ != LoopStatus::Running || held_ || stop_; });
    return state_;
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (stop_) return;
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    log_.close_readers();
    log_.sync();
    env_->close();
  }

 private:
  void ensure_open() const {
    if (stop_) throw StateError("session " + id_ + " is closed");
  }

  // Copies loop state into the published fields. Caller holds mu_.
  void publish() {
    state_ = loop_.status();
    pendingForm_ = loop_.pending_form() ? to_json(*loop_.pending_form()) : Json(nullptr);
    pendingAction_ = loop_.pending_action() ? Json(to_json(*loop_.pending_action())) : Json(nullptr);
    pausedAt_ = loop_.paused_at();
    error_ = loop_.last_error();
    if (state_ == LoopStatus::PausedClarify) pausedSince_ = std::chrono::steady_clock::now();
  }

  // After a step or an intervention: publish, flush at decision boundaries,
  // check the final screen on finish.
  void settle_locked() {
    publish();
    if (state_ == LoopStatus::Finished && verifier_) check_outcome();
    if (state_ != LoopStatus::Running) log_.sync();
  }

  void check_outcome() {
    try {
      auto shot = env_->observe().screenshotRef;
      if (!shot) return;
      auto v = verify_outcome(loop_.context(), shot, *verifier_);
      loop_.note("verdict", {{"succeeded", v.succeeded}, {"evidence", v.evidence}, {"model", v.modelId}});
    } catch (const Error& e) {
      loop_.note("error", {{"message", std::string("outcome check failed: ") + e.what()}});
    }
  }

  void work() {
    std::unique_lock lock(mu_);
    while (true) {
      auto ready = [&] { return stop_ || (state_ == LoopStatus::Running && !held_); };
      if (state_ == LoopStatus::PausedClarify && clarifyTimeout_ && !held_) {
        const auto deadline = pausedSince_ + *clarifyTimeout_;
        if (!cv_.wait_until(lock, deadline, [&] { return ready() || state_ != LoopStatus::PausedClarify; })) {
          // Nobody answered in time: let the agent decide.
          try {
            loop_.resume(loop_.escape_response());
          } catch (const Error& e) {
            loop_.note("error", {{"message", std::string("timed-out clarification: ") + e.what()}});
          }
          settle_locked();
          cv_.notify_all();
          continue;
        }
      } else {
        cv_.wait(lock, [&] { return ready() || (state_ == LoopStatus::PausedClarify && clarifyTimeout_ && !held_); });
      }
      if (stop_) return;
      if (state_ != LoopStatus::Running || held_) continue;
      lock.unlock();
      loop_.advance();
      lock.lock();
      settle_locked();
      cv_.notify_all();
    }
  }

  std::string id_;
  SessionRequest request_;
  PauseStrategy strategy_;
  std::unique_ptr<Environment> env_;
  std::shared_ptr<ModelClient> gateway_;
  std::shared_ptr<ModelClient> verifier_;
  EventLog log_;
  AgentLoop loop_;
  std::optional<std::chrono::milliseconds> clarifyTimeout_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  LoopStatus state_ = LoopStatus::Idle;
  bool held_ = false;
  bool stop_ = false;
  Json pendingForm_;
  Json pendingAction_;
  std::optional<int> pausedAt_;
  std::string error_;
  std::chrono::steady_clock::time_point pausedSince_{};
  std::thread worker_;
};

class SessionManager {
 public:
  explicit SessionManager(ServiceOptions options) : options_(std::move(options)) {
    if (!options_.gateway) throw ConfigError("the service needs a model gateway factory");
  }
  ~SessionManager() { shutdown(); }

  std::shared_ptr<Session> create(const SessionRequest& request) {
    strategy_from(request.strategy);
    std::unique_ptr<Environment> env;
    try {
      if (options_.environment) {
        env = options_.environment(request);
      } else {
        if (request.fixture.empty()) throw SetupError("session needs a fixture");
        auto fx = std::make_shared<const Fixture>(Fixture::load(resolve_fixture(request.fixture, options_.fixtureDir)));
        env = std::make_unique<ReplayEnvironment>(std::move(fx));
      }
    } catch (const LoadError& e) {
      throw SetupError(e.what());
    } catch (const EnvironmentError& e) {
      throw SetupError(e.what());
    }
    auto gateway = options_.gateway(request);
    auto verifier = options_.verifier ? options_.verifier(request) : nullptr;
    auto id = new_session_id();
    std::filesystem::path trace;
    if (!options_.traceDir.empty()) trace = options_.traceDir / (id + ".jsonl");
    auto s = std::make_shared<Session>(id, request, std::move(env), std::move(gateway), std::move(verifier), trace,
                                       options_.clarifyTimeout);
    std::lock_guard lock(mu_);
    sessions_[id] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("no session " + id);
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

  void shutdown() {
    std::map<std::string, std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(mu_);
      all.swap(sessions_);
    }
    for (auto& [_, s] : all) s->stop();
  }

  const ServiceOptions& options() const { return options_; }

 private:
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace morae
