#pragma once

// Per-step state shared by the decision loop, prompts and forms.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "morae/action.hpp"
#include "morae/dom.hpp"

namespace morae {

// Audible feedback the operator panel maps to tones.
enum class CueKind { Click, Type, Prompt, Confirm };

inline std::string_view to_string(CueKind c) {
  switch (c) {
    case CueKind::Click: return "click";
    case CueKind::Type: return "type";
    case CueKind::Prompt: return "prompt";
    case CueKind::Confirm: return "confirm";
  }
  return "?";
}

inline CueKind cue_for(const ActionDirective& a) {
  switch (a.kind) {
    case ActionKind::Click: return CueKind::Click;
    case ActionKind::SetValue: return CueKind::Type;
    case ActionKind::Finish: return CueKind::Confirm;
  }
  return CueKind::Confirm;
}

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct ExecutedAction {
  ActionDirective directive;
  int stepIndex = 0;
  std::string outcomeNote;
  std::int64_t timestamp = 0;
  CueKind cue = CueKind::Click;
};

struct ClarificationResponse {
  std::string formId;
  // Ordered (fieldKey, value) pairs.
  std::vector<std::pair<std::string, std::string>> answers;
  std::int64_t submittedAt = 0;
  // "Let the agent decide": resume with the form's defaults.
  bool escape = false;

  const std::string* answer(std::string_view key) const {
    for (const auto& [k, v] : answers)
      if (k == key) return &v;
    return nullptr;
  }
};

struct Observation {
  SimplifiedDom dom;
  std::optional<std::string> screenshotRef;
};

struct StepContext {
  std::string command;
  int stepIndex = 0;
  Observation observation;
  std::vector<ExecutedAction> history;
  std::vector<ClarificationResponse> clarifications;
  std::optional<std::string> screenReader;

  // `CLARIFIED:` section, one `key: value` line per answer in order.
  std::string clarified_section() const {
    std::string out;
    for (const auto& c : clarifications) {
      if (c.escape && c.answers.empty()) {
        out += "- (user let the agent decide; keep the defaults)\n";
        continue;
      }
      for (const auto& [k, v] : c.answers) out += "- " + k + ": " + v + "\n";
    }
    if (out.empty()) return {};
    return "CLARIFIED:\n" + out;
  }

  std::string history_text() const {
    std::string out;
    for (const auto& h : history) {
      out += std::to_string(h.stepIndex + 1) + ". " + render_action(h.directive);
      if (!h.outcomeNote.empty()) out += "  # " + h.outcomeNote;
      out += "\n";
    }
    return out;
  }
};

}  // namespace morae
