#pragma once

// Model gateway: the request shape every backend accepts, the tagged agent
// output grammar, and the offline backends (scripted mock, call recorder).
// The HTTP backend lives in http_gateway.hpp so that code which only needs
// the mock does not pull in the socket stack.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "morae/action.hpp"
#include "morae/errors.hpp"
#include "morae/text.hpp"

namespace morae {

using Json = nlohmann::ordered_json;

enum class Role { User, Assistant };

inline std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

struct Message {
  Role role = Role::User;
  std::string content;
  // Attachment id resolved by the session store; never inlined.
  std::optional<std::string> imageRef;
};

struct ModelRequest {
  std::string systemPrompt;
  std::vector<Message> messages;
  double temperature = 0.0;
  std::string modelId;

  // Routing metadata. Not part of the wire payload.
  std::string templateId;
  int stepIndex = 0;
};

// Stable digest over everything the endpoint would see (images by id only).
inline std::string request_digest(const ModelRequest& r) {
  auto h = text::fnv1a(r.systemPrompt);
  for (const auto& m : r.messages) {
    h = text::fnv1a(to_string(m.role), h);
    h = text::fnv1a("\x1f", h);
    h = text::fnv1a(m.content, h);
    h = text::fnv1a("\x1e", h);
    if (m.imageRef) h = text::fnv1a(*m.imageRef, h);
  }
  return text::hex64(h);
}

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const ModelRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Tagged agent output: <Plan>, <Thought>, <Verify>, <Action>.

struct AgentOutput {
  std::optional<std::string> plan;
  std::optional<std::string> thought;
  std::optional<std::string> verifyBlock;
  ActionDirective action;
  std::string raw;
};

namespace gateway_detail {

inline std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from = 0) {
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k)
      ok = std::tolower(static_cast<unsigned char>(hay[i + k])) ==
           std::tolower(static_cast<unsigned char>(needle[k]));
    if (ok) return i;
  }
  return std::string_view::npos;
}

// First <tag>...</tag> block. nullopt when absent or unterminated.
inline std::optional<std::string> first_block(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  auto b = find_ci(text, open);
  if (b == std::string_view::npos) return std::nullopt;
  b += open.size();
  auto e = find_ci(text, close, b);
  if (e == std::string_view::npos) return std::nullopt;
  return text::trim(text.substr(b, e - b));
}

}  // namespace gateway_detail

inline AgentOutput parse_agent_output(std::string_view text) {
  using gateway_detail::first_block;
  AgentOutput out;
  out.raw = std::string(text);
  out.plan = first_block(text, "Plan");
  out.thought = first_block(text, "Thought");
  out.verifyBlock = first_block(text, "Verify");
  auto action = first_block(text, "Action");
  if (!action) throw ProtocolError("model output has no <Action> block", out.raw);
  out.action = parse_action(*action, text);
  return out;
}

inline std::string render_agent_output(const AgentOutput& o) {
  std::string s;
  if (o.plan) s += "<Plan>" + *o.plan + "</Plan>\n";
  if (o.thought) s += "<Thought>" + *o.thought + "</Thought>\n";
  if (o.verifyBlock) s += "<Verify>" + *o.verifyBlock + "</Verify>\n";
  s += "<Action>" + render_action(o.action) + "</Action>";
  return s;
}

// ---------------------------------------------------------------------------
// Scripted mock.
//
// A mock script is a JSON list of step objects:
//   {"task": "t01", "template": "planning", "step": 0, "response": "..."}
// `task`, `template` and `step` are optional filters ("*" or absent = any);
// an optional `digest` pins the entry to one exact request. For a given
// request the most specific matching group wins; repeated requests walk
// through that group in file order and then keep returning its last entry.

struct MockStep {
  std::optional<std::string> task;
  std::optional<std::string> templateId;
  std::optional<int> step;
  std::optional<std::string> digest;
  std::string response;
};

class MockScript {
 public:
  MockScript() = default;
  explicit MockScript(std::vector<MockStep> steps) : steps_(std::move(steps)) {}

  static MockScript from_json(const Json& j) {
    if (!j.is_array()) throw ParseError("$", "mock script must be a JSON list of step objects");
    std::vector<MockStep> steps;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& e = j[i];
      const auto path = "$[" + std::to_string(i) + "]";
      if (!e.is_object()) throw ParseError(path, "expected object");
      MockStep s;
      auto str = [&](const char* k) -> std::optional<std::string> {
        auto it = e.find(k);
        if (it == e.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) throw ParseError(path + "." + k, "expected string");
        auto v = it->get<std::string>();
        if (v == "*") return std::nullopt;
        return v;
      };
      s.task = str("task");
      s.templateId = str("template");
      s.digest = str("digest");
      if (auto it = e.find("step"); it != e.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw ParseError(path + ".step", "expected integer");
        s.step = it->get<int>();
      }
      auto r = e.find("response");
      if (r == e.end() || !r->is_string()) throw ParseError(path + ".response", "missing response text");
      s.response = r->get<std::string>();
      steps.push_back(std::move(s));
    }
    return MockScript(std::move(steps));
  }

  static MockScript load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open mock script " + path.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("$", std::string("mock script ") + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  Json to_json() const {
    Json arr = Json::array();
    for (const auto& s : steps_) {
      Json e;
      if (s.task) e["task"] = *s.task;
      if (s.templateId) e["template"] = *s.templateId;
      if (s.step) e["step"] = *s.step;
      if (s.digest) e["digest"] = *s.digest;
      e["response"] = s.response;
      arr.push_back(std::move(e));
    }
    return arr;
  }

  const std::vector<MockStep>& steps() const { return steps_; }

 private:
  std::vector<MockStep> steps_;
};

// One session's view of a script. The cursor state is per instance.
class ScriptedMock final : public ModelClient {
 public:
  ScriptedMock(std::shared_ptr<const MockScript> script, std::string task = {})
      : script_(std::move(script)), task_(std::move(task)) {}

  explicit ScriptedMock(MockScript script, std::string task = {})
      : ScriptedMock(std::make_shared<const MockScript>(std::move(script)), std::move(task)) {}

  std::string complete(const ModelRequest& request) override {
    std::lock_guard lock(mu_);
    const auto digest = request_digest(request);
    // Specificity: digest, template, step, task each add weight.
    int best = -1;
    std::vector<std::size_t> group;
    const auto& steps = script_->steps();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& s = steps[i];
      if (s.task && *s.task != task_) continue;
      if (s.templateId && *s.templateId != request.templateId) continue;
      if (s.step && *s.step != request.stepIndex) continue;
      if (s.digest && *s.digest != digest) continue;
      int score = (s.digest ? 8 : 0) + (s.templateId ? 4 : 0) + (s.step ? 2 : 0) + (s.task ? 1 : 0);
      if (score > best) {
        best = score;
        group.clear();
      }
      if (score == best) group.push_back(i);
    }
    if (group.empty())
      throw GatewayError("mock script has no response for template '" + request.templateId +
                         "' at step " + std::to_string(request.stepIndex) +
                         (task_.empty() ? "" : " of task '" + task_ + "'"));
    auto& served = served_[{best, request.templateId, request.stepIndex}];
    const auto idx = group[std::min(served, group.size() - 1)];
    ++served;
    return steps[idx].response;
  }

 private:
  std::shared_ptr<const MockScript> script_;
  std::string task_;
  std::mutex mu_;
  std::map<std::tuple<int, std::string, int>, std::size_t> served_;
};

// Records every call (and its answer) passing through to an inner client.
struct RecordedCall {
  std::string templateId;
  int stepIndex = 0;
  std::string digest;
  std::string response;
  bool failed = false;
};

class RecordingClient final : public ModelClient {
 public:
  explicit RecordingClient(ModelClient& inner) : inner_(inner) {}

  std::string complete(const ModelRequest& request) override {
    RecordedCall call{request.templateId, request.stepIndex, request_digest(request), {}, false};
    try {
      call.response = inner_.complete(request);
    } catch (...) {
      call.failed = true;
      std::lock_guard lock(mu_);
      calls_.push_back(std::move(call));
      throw;
    }
    std::lock_guard lock(mu_);
    calls_.push_back(call);
    return call.response;
  }

  std::vector<RecordedCall> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

  std::size_t count(std::string_view templateId) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(
        calls_.begin(), calls_.end(), [&](const RecordedCall& c) { return c.templateId == templateId; }));
  }

 private:
  ModelClient& inner_;
  mutable std::mutex mu_;
  std::vector<RecordedCall> calls_;
};

}  // namespace morae
