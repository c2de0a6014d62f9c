#pragma once

// Per-step decision logic: partition the planned actions into critical and
// non-critical, verify ambiguity with a prioritized question set, derive the
// ambiguity indicator A and the sufficiency indicator I, and route the step.
//
//   safety gate        -> ConfirmSideEffect
//   critical pending   -> ExecuteCritical
//   A and I            -> PauseForClarification
//   A and not I        -> GatherMoreDetails
//   otherwise          -> Proceed

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "morae/context.hpp"
#include "morae/gateway.hpp"
#include "morae/prompts.hpp"

namespace morae {

// ---------------------------------------------------------------------------
// Types

struct ActionPlan {
  std::vector<ActionDirective> critical;
  std::vector<ActionDirective> nonCritical;
  std::string rationale;
};

enum class QuestionCategory { Selection, Specification, TieBreak, MissingDetail, Other };

inline std::string_view to_string(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::Selection: return "selection";
    case QuestionCategory::Specification: return "specification";
    case QuestionCategory::TieBreak: return "tie-break";
    case QuestionCategory::MissingDetail: return "missing-detail";
    case QuestionCategory::Other: return "other";
  }
  return "other";
}

inline QuestionCategory category_from(std::string_view s) {
  auto k = text::lower(text::trim(s));
  std::replace(k.begin(), k.end(), '_', '-');
  std::replace(k.begin(), k.end(), ' ', '-');
  if (k == "selection") return QuestionCategory::Selection;
  if (k == "specification") return QuestionCategory::Specification;
  if (k == "tie-break" || k == "tiebreak" || k == "tie-breaker") return QuestionCategory::TieBreak;
  if (k == "missing-detail" || k == "missing-details" || k == "missing") return QuestionCategory::MissingDetail;
  return QuestionCategory::Other;
}

enum class Answer { Yes, No, UnanswerableProceed, NotImportantProceed };

inline std::string_view to_string(Answer a) {
  switch (a) {
    case Answer::Yes: return "yes";
    case Answer::No: return "no";
    case Answer::UnanswerableProceed: return "unanswerable-and-proceed";
    case Answer::NotImportantProceed: return "not-important-and-proceed";
  }
  return "?";
}

inline std::optional<Answer> answer_from(std::string_view s) {
  auto k = text::lower(s);
  for (auto& c : k)
    if (c == '-' || c == '_' || c == ',') c = ' ';
  k = text::normalize_ws(k);
  while (!k.empty() && (k.back() == '.' || k.back() == '!')) k.pop_back();
  if (k == "yes") return Answer::Yes;
  if (k == "no") return Answer::No;
  if (k == "unanswerable and proceed" || k == "unanswerable") return Answer::UnanswerableProceed;
  if (k == "not important and proceed" || k == "not important") return Answer::NotImportantProceed;
  return std::nullopt;
}

struct VerificationQuestion {
  std::string text;
  QuestionCategory category = QuestionCategory::Other;
  std::optional<Answer> answer;
  int priority = 1;  // 1 = most important

  bool operator==(const VerificationQuestion&) const = default;
};

struct AmbiguityAssessment {
  std::vector<VerificationQuestion> questions;
  bool ambiguous = false;   // A(i)
  bool sufficient = false;  // I(i)

  // Highest-priority question answered yes; titles the clarification form.
  const VerificationQuestion* lead_question() const {
    const VerificationQuestion* best = nullptr;
    for (const auto& q : questions)
      if (q.answer == Answer::Yes && (!best || q.priority < best->priority)) best = &q;
    return best;
  }
};

enum class DecisionKind { ExecuteCritical, PauseForClarification, GatherMoreDetails, Proceed, ConfirmSideEffect };

inline std::string_view to_string(DecisionKind k) {
  switch (k) {
    case DecisionKind::ExecuteCritical: return "ExecuteCritical";
    case DecisionKind::PauseForClarification: return "PauseForClarification";
    case DecisionKind::GatherMoreDetails: return "GatherMoreDetails";
    case DecisionKind::Proceed: return "Proceed";
    case DecisionKind::ConfirmSideEffect: return "ConfirmSideEffect";
  }
  return "?";
}

inline std::optional<DecisionKind> decision_kind_from(std::string_view s) {
  for (auto k : {DecisionKind::ExecuteCritical, DecisionKind::PauseForClarification, DecisionKind::GatherMoreDetails,
                 DecisionKind::Proceed, DecisionKind::ConfirmSideEffect})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Decision {
  DecisionKind kind = DecisionKind::Proceed;
  // Actions to run (ExecuteCritical / Proceed / GatherMoreDetails) or the
  // side-effecting action awaiting confirmation.
  std::vector<ActionDirective> actions;
  AmbiguityAssessment assessment;
  // Set when the gather cap turned a GatherMoreDetails into a pause.
  bool forced = false;
};

enum class StrategyKind { Prompting, VerifyFirstStep, VerifyPerStep, VerifyPerStepWithPlanning };

struct PauseStrategy {
  StrategyKind kind = StrategyKind::VerifyPerStepWithPlanning;
  int resampleCount = 3;
  int topK = 5;
};

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Prompting: return "prompting";
    case StrategyKind::VerifyFirstStep: return "verify-first";
    case StrategyKind::VerifyPerStep: return "verify-per-step";
    case StrategyKind::VerifyPerStepWithPlanning: return "verify-plan";
  }
  return "?";
}

inline PauseStrategy strategy_from(std::string_view name) {
  for (auto k : {StrategyKind::Prompting, StrategyKind::VerifyFirstStep, StrategyKind::VerifyPerStep,
                 StrategyKind::VerifyPerStepWithPlanning})
    if (to_string(k) == name) return PauseStrategy{k};
  throw ConfigError("unknown strategy '" + std::string(name) +
                    "' (expected prompting, verify-first, verify-per-step or verify-plan)");
}

// ---------------------------------------------------------------------------
// Stage 1: plan partition

namespace decision_detail {

// Finds the first `click(...)`, `setValue(...)` or `finish(...)` call in a
// line and returns it verbatim, honouring quoted strings.
inline std::optional<std::string> find_call(std::string_view line) {
  std::size_t best = std::string_view::npos;
  for (std::string_view name : {"click(", "setValue(", "finish("}) {
    auto p = line.find(name);
    while (p != std::string_view::npos && p > 0 && std::isalnum(static_cast<unsigned char>(line[p - 1])))
      p = line.find(name, p + 1);
    if (p < best) best = p;
  }
  if (best == std::string_view::npos) return std::nullopt;
  bool quoted = false;
  for (std::size_t i = best; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ')') {
      return std::string(line.substr(best, i - best + 1));
    }
  }
  return std::nullopt;
}

inline void push_unique(std::vector<ActionDirective>& v, const ActionDirective& a) {
  if (std::find(v.begin(), v.end(), a) == v.end()) v.push_back(a);
}

}  // namespace decision_detail

// Derives the partition from a parsed output's <Plan> block. Lines tagged
// `critical:` / `non-critical:` are honoured; untagged action lines count as
// critical; with no action lines at all the output's own action is critical.
inline ActionPlan plan_from_output(const AgentOutput& out) {
  static const std::regex tagged(R"(^[\s\-\*\d\.\)]*(non[\s\-]?critical|critical)\s*[:\-]\s*(.*)$)",
                                 std::regex::icase);
  ActionPlan plan;
  plan.rationale = out.thought.value_or(out.plan.value_or(""));
  bool any = false;
  if (out.plan) {
    for (const auto& line : text::split_lines(*out.plan)) {
      auto call = decision_detail::find_call(line);
      if (!call) continue;
      ActionDirective a;
      try {
        a = parse_action(*call, out.raw);
      } catch (const ProtocolError&) {
        continue;
      }
      any = true;
      std::smatch m;
      const bool nonCritical = std::regex_match(line, m, tagged) && text::lower(m[1].str()).rfind("non", 0) == 0;
      if (nonCritical)
        decision_detail::push_unique(plan.nonCritical, a);
      else
        decision_detail::push_unique(plan.critical, a);
    }
  }
  if (!any) plan.critical.push_back(out.action);
  // Keep the two sets disjoint; critical wins.
  std::erase_if(plan.nonCritical, [&](const ActionDirective& a) {
    return std::find(plan.critical.begin(), plan.critical.end(), a) != plan.critical.end();
  });
  return plan;
}

struct StepProposal {
  AgentOutput output;
  ActionPlan plan;
};

inline StepProposal propose_step(const StepContext& ctx, ModelClient& gateway, const PromptOptions& opts = {}) {
  auto req = build_prompt("planning", ctx, {}, opts);
  auto out = parse_agent_output(gateway.complete(req));
  auto plan = plan_from_output(out);
  return {std::move(out), std::move(plan)};
}

inline ActionPlan plan_step(const StepContext& ctx, ModelClient& gateway, const PromptOptions& opts = {}) {
  return propose_step(ctx, gateway, opts).plan;
}

// Critical actions not yet in the history, matched by kind and target.
// finish() is terminal, never "pending".
inline std::vector<ActionDirective> pending_critical(const ActionPlan& plan, const std::vector<ExecutedAction>& history) {
  std::vector<ActionDirective> out;
  for (const auto& c : plan.critical) {
    if (c.is_finish()) continue;
    const bool done = std::any_of(history.begin(), history.end(),
                                  [&](const ExecutedAction& h) { return h.directive.same_target(c); });
    if (!done) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: verification

struct VerifyBlock {
  std::vector<VerificationQuestion> questions;
  std::optional<bool> detailsSufficient;
};

// Grammar, one entry per line:
//   [1.] [category] question text -> answer
//   DETAILS: sufficient|insufficient
inline VerifyBlock parse_verify_block(std::string_view block) {
  static const std::regex numbering(R"(^\s*(?:\d+[\.\):]|[-\*•])\s*)");
  static const std::regex category(R"(^\[([^\]]*)\]\s*)");
  static const std::regex details(R"(^\s*details\s*:\s*(\w+)\s*$)", std::regex::icase);
  VerifyBlock out;
  int priority = 0;
  for (auto line : text::split_lines(block)) {
    line = text::trim(line);
    if (line.empty()) continue;
    std::smatch m;
    if (std::regex_match(line, m, details)) {
      const auto v = text::lower(m[1].str());
      if (v == "sufficient") out.detailsSufficient = true;
      else if (v == "insufficient") out.detailsSufficient = false;
      continue;
    }
    line = std::regex_replace(line, numbering, "", std::regex_constants::format_first_only);
    VerificationQuestion q;
    if (std::regex_search(line, m, category) && m.position(0) == 0) {
      q.category = category_from(m[1].str());
      line = m.suffix().str();
    }
    std::size_t arrow = line.rfind("->");
    if (arrow == std::string::npos) arrow = line.rfind("=>");
    if (arrow != std::string::npos) {
      q.answer = answer_from(line.substr(arrow + 2));
      if (q.answer) line = line.substr(0, arrow);
    }
    q.text = text::normalize_ws(line);
    if (q.text.empty()) continue;
    q.priority = ++priority;
    out.questions.push_back(std::move(q));
  }
  return out;
}

inline std::string render_questions(const std::vector<VerificationQuestion>& qs) {
  std::string out;
  for (const auto& q : qs) {
    out += std::to_string(q.priority) + ". [" + std::string(to_string(q.category)) + "] " + q.text;
    if (q.answer) out += " -> " + std::string(to_string(*q.answer));
    out += "\n";
  }
  return out;
}

// Lower-case alphanumerics separated by single spaces.
inline std::string normalize_question(std::string_view s) {
  std::string out;
  bool gap = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (gap && !out.empty()) out.push_back(' ');
      gap = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      gap = true;
    }
  }
  return out;
}

// Merges several samples: dedupe by normalized text, rank by how many
// samples asked it, then by best priority, then by first appearance.
inline std::vector<VerificationQuestion> rank_questions(const std::vector<std::vector<VerificationQuestion>>& samples,
                                                        int topK) {
  struct Tally {
    VerificationQuestion first;
    int frequency = 0;
    int bestPriority = 0;
    std::size_t order = 0;
  };
  std::map<std::string, Tally> tally;
  std::size_t order = 0;
  for (const auto& sample : samples) {
    for (const auto& q : sample) {
      auto key = normalize_question(q.text);
      if (key.empty()) continue;
      auto [it, fresh] = tally.try_emplace(key);
      if (fresh) {
        it->second.first = q;
        it->second.first.answer.reset();
        it->second.bestPriority = q.priority;
        it->second.order = order++;
      }
      ++it->second.frequency;
      it->second.bestPriority = std::min(it->second.bestPriority, q.priority);
    }
  }
  std::vector<Tally> ranked;
  for (auto& [_, t] : tally) ranked.push_back(std::move(t));
  std::sort(ranked.begin(), ranked.end(), [](const Tally& a, const Tally& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    if (a.bestPriority != b.bestPriority) return a.bestPriority < b.bestPriority;
    return a.order < b.order;
  });
  std::vector<VerificationQuestion> out;
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < topK; ++i) {
    auto q = ranked[i].first;
    q.priority = static_cast<int>(i) + 1;
    out.push_back(std::move(q));
  }
  return out;
}

// Holds what verification remembers across steps of one task.
struct VerificationState {
  std::optional<std::vector<VerificationQuestion>> frozen;
  std::optional<bool> lastDetails;
};

// Produces this step's question list. Per-step strategies issue one
// verification request and return answered questions. VerifyFirstStep
// samples `resampleCount` times at its first call, keeps the top-K, and
// returns that same (unanswered) list on every later call.
inline std::vector<VerificationQuestion> generate_verification(const StepContext& ctx, const PauseStrategy& strategy,
                                                               ModelClient& gateway, VerificationState& state,
                                                               const PromptOptions& opts = {},
                                                               std::string planNote = {}) {
  switch (strategy.kind) {
    case StrategyKind::Prompting:
      throw UsageError("the prompting strategy does not generate verification questions");
    case StrategyKind::VerifyFirstStep: {
      if (state.frozen) return *state.frozen;
      if (strategy.resampleCount < 1 || strategy.topK < 1)
        throw ConfigError("verify-first needs resampleCount >= 1 and topK >= 1");
      std::vector<std::vector<VerificationQuestion>> samples;
      for (int i = 0; i < strategy.resampleCount; ++i) {
        auto req = build_prompt("verification", ctx, {}, opts);
        auto raw = gateway.complete(req);
        auto body = gateway_detail::first_block(raw, "Verify").value_or(raw);
        samples.push_back(parse_verify_block(body).questions);
      }
      state.frozen = rank_questions(samples, strategy.topK);
      return *state.frozen;
    }
    case StrategyKind::VerifyPerStep:
    case StrategyKind::VerifyPerStepWithPlanning: {
      std::map<std::string, std::string, std::less<>> extras;
      if (!planNote.empty()) extras["plan_note"] = "Current plan:\n" + planNote + "\n\n";
      auto req = build_prompt("verification", ctx, extras, opts);
      auto raw = gateway.complete(req);
      auto body = gateway_detail::first_block(raw, "Verify").value_or(raw);
      auto parsed = parse_verify_block(body);
      state.lastDetails = parsed.detailsSufficient;
      return parsed.questions;
    }
  }
  return {};
}

// Copies answers from an inline <Verify> block onto a fixed question list
// by position; questions left without an answer proceed as unanswerable.
inline std::vector<VerificationQuestion> answer_frozen(std::vector<VerificationQuestion> frozen, const VerifyBlock& inlineBlock) {
  for (std::size_t i = 0; i < frozen.size(); ++i) {
    if (i < inlineBlock.questions.size() && inlineBlock.questions[i].answer)
      frozen[i].answer = inlineBlock.questions[i].answer;
    else
      frozen[i].answer = Answer::UnanswerableProceed;
  }
  return frozen;
}

// A(i) and I(i).
inline AmbiguityAssessment assess(std::vector<VerificationQuestion> questions, bool detailsRecorded) {
  AmbiguityAssessment a;
  for (const auto& q : questions) {
    if (!q.answer) throw ContractError("verification question has no answer: " + q.text);
    if (*q.answer == Answer::Yes) a.ambiguous = true;
  }
  a.sufficient = detailsRecorded;
  a.questions = std::move(questions);
  return a;
}

// ---------------------------------------------------------------------------
// Stage 3: routing

inline DecisionKind decide_kind(bool criticalIncomplete, bool ambiguous, bool sufficient, bool safetyFlag) {
  if (safetyFlag) return DecisionKind::ConfirmSideEffect;
  if (criticalIncomplete) return DecisionKind::ExecuteCritical;
  if (ambiguous && sufficient) return DecisionKind::PauseForClarification;
  if (ambiguous) return DecisionKind::GatherMoreDetails;
  return DecisionKind::Proceed;
}

inline Decision decide(bool criticalIncomplete, const AmbiguityAssessment& assessment, bool safetyFlag) {
  Decision d;
  d.kind = decide_kind(criticalIncomplete, assessment.ambiguous, assessment.sufficient, safetyFlag);
  d.assessment = assessment;
  return d;
}

// ---------------------------------------------------------------------------
// Safety gate

namespace decision_detail {

inline bool has_word(const std::string& haystack, std::string_view phrase) {
  std::size_t pos = 0;
  while ((pos = haystack.find(phrase, pos)) != std::string::npos) {
    const bool leftOk = pos == 0 || !std::isalnum(static_cast<unsigned char>(haystack[pos - 1]));
    const auto end = pos + phrase.size();
    const bool rightOk = end >= haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[end]));
    if (leftOk && rightOk) return true;
    ++pos;
  }
  return false;
}

}  // namespace decision_detail

inline bool is_side_effect_label(std::string_view label) {
  const auto l = text::normalize_ws(text::lower(label));
  if (decision_detail::has_word(l, "add to cart")) return false;
  for (std::string_view verb : {"submit", "purchase", "place order", "delete", "send", "checkout", "check out"})
    if (decision_detail::has_word(l, verb)) return true;
  return false;
}

// True when the action would commit something outside the page. Only clicks
// commit; typing into a field never does.
inline bool flag_side_effect(const ActionDirective& action, const StepContext& ctx) {
  if (action.kind != ActionKind::Click || !action.targetId) return false;
  const auto* el = ctx.observation.dom.find(*action.targetId);
  if (!el) return false;
  return is_side_effect_label(el->label() + " " + el->text.value_or(""));
}

}  // namespace morae
