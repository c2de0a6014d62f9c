#pragma once

// Action vocabulary shared by the model grammar, the environment and traces:
//   click(<id>)   setValue(<id>, "<text>")   finish()
// Inside the quoted value, `"` and `\` are backslash-escaped.

#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "morae/errors.hpp"
#include "morae/text.hpp"

namespace morae {

enum class ActionKind { Click, SetValue, Finish };

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Click: return "click";
    case ActionKind::SetValue: return "setValue";
    case ActionKind::Finish: return "finish";
  }
  return "?";
}

inline std::optional<ActionKind> action_kind_from(std::string_view s) {
  if (s == "click") return ActionKind::Click;
  if (s == "setValue") return ActionKind::SetValue;
  if (s == "finish") return ActionKind::Finish;
  return std::nullopt;
}

struct ActionDirective {
  ActionKind kind = ActionKind::Finish;
  std::optional<int> targetId;
  std::optional<std::string> value;

  static ActionDirective click(int id) { return {ActionKind::Click, id, std::nullopt}; }
  static ActionDirective set_value(int id, std::string v) { return {ActionKind::SetValue, id, std::move(v)}; }
  static ActionDirective finish() { return {}; }

  bool is_finish() const { return kind == ActionKind::Finish; }

  // Same kind and target; ignores the typed value.
  bool same_target(const ActionDirective& o) const { return kind == o.kind && targetId == o.targetId; }

  bool operator==(const ActionDirective&) const = default;
};

inline void validate(const ActionDirective& a) {
  switch (a.kind) {
    case ActionKind::Click:
      if (!a.targetId || a.value) throw ContractError("click requires a target and no value");
      break;
    case ActionKind::SetValue:
      if (!a.targetId || !a.value) throw ContractError("setValue requires a target and a value");
      break;
    case ActionKind::Finish:
      if (a.targetId || a.value) throw ContractError("finish takes no arguments");
      break;
  }
}

inline std::string render_action(const ActionDirective& a) {
  switch (a.kind) {
    case ActionKind::Click: return "click(" + std::to_string(a.targetId.value_or(-1)) + ")";
    case ActionKind::SetValue: {
      std::string out = "setValue(" + std::to_string(a.targetId.value_or(-1)) + ", \"";
      for (char c : a.value.value_or("")) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      return out + "\")";
    }
    case ActionKind::Finish: return "finish()";
  }
  return {};
}

namespace action_detail {

struct Cursor {
  std::string_view s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && text::is_space(s[pos])) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  std::optional<int> integer() {
    skip_ws();
    std::size_t start = pos;
    if (pos < s.size() && s[pos] == '-') ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start || (pos == start + 1 && s[start] == '-')) return std::nullopt;
    try {
      return std::stoi(std::string(s.substr(start, pos - start)));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  std::optional<std::string> quoted() {
    skip_ws();
    if (pos >= s.size() || s[pos] != '"') return std::nullopt;
    ++pos;
    std::string out;
    while (pos < s.size()) {
      char c = s[pos++];
      if (c == '\\') {
        if (pos >= s.size()) return std::nullopt;
        out.push_back(s[pos++]);
      } else if (c == '"') {
        return out;
      } else {
        out.push_back(c);
      }
    }
    return std::nullopt;
  }
};

}  // namespace action_detail

// Parses one call expression; `raw` is echoed into the error for diagnosis.
inline ActionDirective parse_action(std::string_view call, std::string_view raw = {}) {
  const std::string rawText(raw.empty() ? call : raw);
  action_detail::Cursor c{call};
  c.skip_ws();
  std::size_t start = c.pos;
  while (c.pos < call.size() && std::isalpha(static_cast<unsigned char>(call[c.pos]))) ++c.pos;
  const auto name = call.substr(start, c.pos - start);
  const auto kind = action_kind_from(name);
  if (!kind) throw ProtocolError("unknown action '" + std::string(name) + "'", rawText);
  if (!c.eat('(')) throw ProtocolError("expected '(' after " + std::string(name), rawText);

  ActionDirective a;
  a.kind = *kind;
  if (a.kind != ActionKind::Finish) {
    a.targetId = c.integer();
    if (!a.targetId) throw ProtocolError(std::string(name) + " needs an element id", rawText);
    if (a.kind == ActionKind::SetValue) {
      if (!c.eat(',')) throw ProtocolError("setValue needs a quoted value", rawText);
      a.value = c.quoted();
      if (!a.value) throw ProtocolError("setValue value must be a quoted string", rawText);
    }
  }
  if (!c.eat(')')) throw ProtocolError("unterminated " + std::string(name) + " call", rawText);
  c.skip_ws();
  if (c.pos != call.size()) throw ProtocolError("trailing text after action call", rawText);
  return a;
}

inline nlohmann::ordered_json to_json(const ActionDirective& a) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(a.kind));
  if (a.targetId) j["targetId"] = *a.targetId;
  if (a.value) j["value"] = *a.value;
  return j;
}

// `path` names the location for error messages.
inline ActionDirective action_from_json(const nlohmann::ordered_json& j, const std::string& path = "$") {
  if (!j.is_object()) throw ParseError(path, "expected action object");
  auto k = j.find("kind");
  if (k == j.end() || !k->is_string()) throw ParseError(path + ".kind", "missing action kind");
  auto kind = action_kind_from(k->get<std::string>());
  if (!kind) throw ParseError(path + ".kind", "unknown action kind '" + k->get<std::string>() + "'");
  ActionDirective a;
  a.kind = *kind;
  if (auto t = j.find("targetId"); t != j.end() && !t->is_null()) {
    if (!t->is_number_integer()) throw ParseError(path + ".targetId", "expected integer");
    a.targetId = t->get<int>();
  }
  if (auto v = j.find("value"); v != j.end() && !v->is_null()) {
    if (!v->is_string()) throw ParseError(path + ".value", "expected string");
    a.value = v->get<std::string>();
  }
  try {
    validate(a);
  } catch (const ContractError& e) {
    throw ParseError(path, e.what());
  }
  return a;
}

}  // namespace morae
