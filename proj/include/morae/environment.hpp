#pragma once

// Where actions land and observations come from.
//
// Two backends share one interface: ReplayEnvironment walks a recorded
// fixture (a list of page snapshots and the transitions between them), and
// the live browser driver in cdp.hpp talks to a real page.

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "morae/context.hpp"
#include "morae/dom.hpp"
#include "morae/errors.hpp"

namespace morae {

class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation observe() = 0;
  // Performs `directive` as action number `stepIndex` of the session.
  virtual ExecutedAction execute(const ActionDirective& directive, int stepIndex) = 0;
  virtual void reset() = 0;
  virtual void close() {}
};

// ---------------------------------------------------------------------------
// Fixtures

struct FixtureState {
  RawDomNode snapshot;
  std::optional<std::string> screenshot;
};

struct FixtureTransition {
  int from = 0;
  ActionDirective action;
  // A setValue transition with value "*" accepts any typed text.
  bool anyValue = false;
  int to = 0;

  bool matches(int state, const ActionDirective& a) const {
    if (state != from || a.kind != action.kind || a.targetId != action.targetId) return false;
    return anyValue || a.value == action.value;
  }
};

struct Fixture {
  std::vector<FixtureState> states;
  std::vector<FixtureTransition> transitions;

  std::optional<int> next(int state, const ActionDirective& a) const {
    for (const auto& t : transitions)
      if (t.matches(state, a)) return t.to;
    return std::nullopt;
  }

  static Fixture from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("$", "fixture must be an object");
    if (!j.contains("states") || !j["states"].is_array() || j["states"].empty())
      throw ParseError("$.states", "fixture needs a non-empty states array");
    Fixture f;
    for (std::size_t i = 0; i < j["states"].size(); ++i) {
      const auto& s = j["states"][i];
      const auto path = "$.states[" + std::to_string(i) + "]";
      if (!s.is_object() || !s.contains("snapshot")) throw ParseError(path + ".snapshot", "missing snapshot");
      FixtureState st;
      try {
        st.snapshot = parse_snapshot_json(s["snapshot"]);
      } catch (const ParseError& e) {
        throw ParseError(path + ".snapshot" + e.path().substr(1), e.what());
      }
      if (s.contains("screenshot") && !s["screenshot"].is_null()) {
        if (!s["screenshot"].is_string()) throw ParseError(path + ".screenshot", "expected a string");
        st.screenshot = s["screenshot"].get<std::string>();
      }
      f.states.push_back(std::move(st));
    }
    if (j.contains("transitions")) {
      if (!j["transitions"].is_array()) throw ParseError("$.transitions", "expected an array");
      const int n = static_cast<int>(f.states.size());
      for (std::size_t i = 0; i < j["transitions"].size(); ++i) {
        const auto& t = j["transitions"][i];
        const auto path = "$.transitions[" + std::to_string(i) + "]";
        if (!t.is_object() || !t.contains("from") || !t["from"].is_number_integer() || !t.contains("to") ||
            !t["to"].is_number_integer())
          throw ParseError(path, "transition needs integer from and to");
        FixtureTransition tr;
        tr.from = t["from"].get<int>();
        tr.to = t["to"].get<int>();
        if (tr.from < 0 || tr.from >= n) throw ParseError(path + ".from", "state index out of range");
        if (tr.to < 0 || tr.to >= n) throw ParseError(path + ".to", "dangling transition target");
        if (!t.contains("action")) throw ParseError(path + ".action", "missing action");
        tr.action = action_from_json(t["action"], path + ".action");
        tr.anyValue = tr.action.kind == ActionKind::SetValue && tr.action.value == "*";
        f.transitions.push_back(std::move(tr));
      }
    }
    return f;
  }

  static Fixture load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open fixture " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return from_json(Json::parse(ss.str()));
    } catch (const Json::parse_error& e) {
      throw LoadError("fixture " + path.string() + " is not valid JSON: " + e.what());
    } catch (const ParseError& e) {
      throw LoadError("fixture " + path.string() + " at " + e.path() + ": " + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Replay backend

class ReplayEnvironment : public Environment {
 public:
  explicit ReplayEnvironment(std::shared_ptr<const Fixture> fixture) : fixture_(std::move(fixture)) {
    if (!fixture_ || fixture_->states.empty()) throw LoadError("replay needs a fixture with at least one state");
    simplified_.resize(fixture_->states.size());
  }

  Observation observe() override {
    std::lock_guard lock(mu_);
    ensure_open();
    return {current_dom(), fixture_->states[static_cast<std::size_t>(state_)].screenshot};
  }

  ExecutedAction execute(const ActionDirective& directive, int stepIndex) override {
    std::lock_guard lock(mu_);
    ensure_open();
    validate(directive);
    if (!directive.is_finish()) {
      const auto& dom = current_dom();
      if (!dom.find(*directive.targetId))
        throw TargetError("element " + std::to_string(*directive.targetId) + " is not on the current page (" +
                          std::to_string(dom.elements.size()) + " elements)");
      auto next = fixture_->next(state_, directive);
      if (!next)
        throw DivergenceError("no recorded transition for " + render_action(directive) + " from state " +
                              std::to_string(state_));
      state_ = *next;
    } else if (auto next = fixture_->next(state_, directive)) {
      state_ = *next;
    }
    ++executed_;
    return {directive, stepIndex, "state " + std::to_string(state_), now_ms(), cue_for(directive)};
  }

  void reset() override {
    std::lock_guard lock(mu_);
    state_ = 0;
    executed_ = 0;
    closed_ = false;
  }

  void close() override {
    std::lock_guard lock(mu_);
    closed_ = true;
  }

  int state() const {
    std::lock_guard lock(mu_);
    return state_;
  }
  int executed() const {
    std::lock_guard lock(mu_);
    return executed_;
  }

 private:
  void ensure_open() const {
    if (closed_) throw EnvironmentError("session environment is closed");
  }
  const SimplifiedDom& current_dom() {
    auto& slot = simplified_[static_cast<std::size_t>(state_)];
    if (!slot) slot = simplify(fixture_->states[static_cast<std::size_t>(state_)].snapshot);
    return *slot;
  }

  std::shared_ptr<const Fixture> fixture_;
  std::vector<std::optional<SimplifiedDom>> simplified_;
  mutable std::mutex mu_;
  int state_ = 0;
  int executed_ = 0;
  bool closed_ = false;
};

// Resolves a fixture reference against an optional base directory.
inline std::filesystem::path resolve_fixture(const std::string& ref, const std::filesystem::path& base) {
  std::filesystem::path p(ref);
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace morae
