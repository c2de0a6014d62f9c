#pragma once

// Companion features around the decision loop: routing user text, answering
// questions about the page, and a second look at the final screenshot.

#include <string>

#include "morae/context.hpp"
#include "morae/errors.hpp"
#include "morae/gateway.hpp"
#include "morae/prompts.hpp"
#include "morae/text.hpp"

namespace morae {

enum class QueryClass { UIQuestion, AutomationCommand };

inline std::string_view to_string(QueryClass c) {
  return c == QueryClass::UIQuestion ? "ui-question" : "automation-command";
}

// One-word answer: QUESTION or COMMAND.
inline QueryClass classify_query(std::string_view query, ModelClient& gateway, const PromptOptions& opts = {}) {
  if (text::trim(query).empty()) throw UsageError("cannot classify an empty message");
  StepContext ctx;
  ctx.command = std::string(query);
  auto req = build_prompt("query-classify", ctx, {{"query", std::string(query)}}, opts);
  req.messages.clear();
  req.messages.push_back({Role::User, std::string(query), std::nullopt});
  const auto raw = gateway.complete(req);
  // First alphabetic word of the reply.
  std::string word;
  for (char c : raw) {
    if (std::isalpha(static_cast<unsigned char>(c))) word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    else if (!word.empty()) break;
  }
  if (word == "QUESTION" || word == "UIQUESTION") return QueryClass::UIQuestion;
  if (word == "COMMAND" || word == "AUTOMATIONCOMMAND") return QueryClass::AutomationCommand;
  throw ProtocolError("query classifier answered neither QUESTION nor COMMAND", raw);
}

// Step-by-step keyboard guidance; names shortcuts for ctx.screenReader when set.
inline std::string answer_ui_question(std::string_view question, const StepContext& ctx, ModelClient& gateway,
                                      const PromptOptions& opts = {}) {
  if (text::trim(question).empty()) throw UsageError("empty question");
  auto req = build_prompt("ui-guidance", ctx, {{"question", std::string(question)}}, opts);
  return text::trim(gateway.complete(req));
}

struct VerificationVerdict {
  bool succeeded = false;
  std::string evidence;
  std::string modelId;
};

// Parses `VERDICT: success|failure` and `EVIDENCE: ...` lines.
inline VerificationVerdict parse_verdict(const std::string& raw) {
  std::optional<bool> verdict;
  std::string evidence;
  for (const auto& line : text::split_lines(raw)) {
    auto l = text::trim(line);
    if (text::starts_with_ci(l, "verdict:")) {
      const auto rest = text::trim(l.substr(8));
      auto v = text::lower(rest);
      if (v.rfind("success", 0) == 0) verdict = true;
      else if (v.rfind("fail", 0) == 0) verdict = false;
      else throw ProtocolError("unrecognized verdict '" + v + "'", raw);
      // "VERDICT: success, cart shows 1 item"
      auto comma = rest.find_first_of(",;-");
      if (comma != std::string::npos && evidence.empty()) evidence = text::trim(rest.substr(comma + 1));
    } else if (text::starts_with_ci(l, "evidence:")) {
      evidence = text::trim(l.substr(9));
    }
  }
  if (!verdict) throw ProtocolError("visual verification reply has no VERDICT line", raw);
  if (*verdict && evidence.empty()) throw ProtocolError("a success verdict needs evidence", raw);
  return {*verdict, evidence, {}};
}

// Observational only: nothing in `ctx` changes.
inline VerificationVerdict verify_outcome(const StepContext& ctx, const std::optional<std::string>& screenshotRef,
                                          ModelClient& verifier, const PromptOptions& opts = {}) {
  if (!screenshotRef || screenshotRef->empty()) throw UsageError("no screenshot on record to verify");
  auto req = build_prompt("visual-verify", ctx, {}, opts);
  req.messages.clear();
  req.messages.push_back({Role::User, "Final screenshot attached.", *screenshotRef});
  auto verdict = parse_verdict(verifier.complete(req));
  verdict.modelId = opts.modelId;
  return verdict;
}

}  // namespace morae
