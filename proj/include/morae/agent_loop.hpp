#pragma once

// The per-step loop: observe, propose, verify, decide, then act or pause.
//
// One AgentLoop drives one task. run() returns when the task finishes,
// fails, or pauses for the user; resume() and confirm() continue a paused
// loop. Every model call, decision, action and cue is reported to the
// event sink, which is what traces and the event stream are built from.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "morae/clarify.hpp"
#include "morae/context.hpp"
#include "morae/decision.hpp"
#include "morae/environment.hpp"
#include "morae/errors.hpp"
#include "morae/gateway.hpp"
#include "morae/prompts.hpp"

namespace morae {

enum class LoopStatus { Idle, Running, PausedClarify, PausedConfirm, Finished, Failed };

inline std::string_view to_string(LoopStatus s) {
  switch (s) {
    case LoopStatus::Idle: return "idle";
    case LoopStatus::Running: return "running";
    case LoopStatus::PausedClarify: return "paused-clarify";
    case LoopStatus::PausedConfirm: return "paused-confirm";
    case LoopStatus::Finished: return "finished";
    case LoopStatus::Failed: return "failed";
  }
  return "?";
}

struct LoopOptions {
  // Loop iterations (executed steps plus pauses) before giving up.
  int maxSteps = 20;
  // Consecutive GatherMoreDetails steps before the loop asks anyway.
  int maxGather = 3;
  // Approve side-effect confirmations without stopping (benchmark runs).
  bool autoConfirm = false;
  PromptOptions prompt;
};

using EventSink = std::function<void(const std::string& kind, Json payload)>;

inline Json to_json(const ExecutedAction& e) {
  return {{"action", to_json(e.directive)},
          {"step", e.stepIndex},
          {"note", e.outcomeNote},
          {"timestamp", e.timestamp},
          {"cue", std::string(to_string(e.cue))}};
}

inline Json to_json(const VerificationQuestion& q) {
  Json j{{"text", q.text}, {"category", std::string(to_string(q.category))}, {"priority", q.priority}};
  j["answer"] = q.answer ? Json(std::string(to_string(*q.answer))) : Json(nullptr);
  return j;
}

inline Json to_json(const Decision& d, int step) {
  Json qs = Json::array();
  for (const auto& q : d.assessment.questions) qs.push_back(to_json(q));
  Json acts = Json::array();
  for (const auto& a : d.actions) acts.push_back(to_json(a));
  return {{"step", step},
          {"kind", std::string(to_string(d.kind))},
          {"forced", d.forced},
          {"ambiguous", d.assessment.ambiguous},
          {"sufficient", d.assessment.sufficient},
          {"questions", qs},
          {"actions", acts}};
}

namespace loop_detail {

inline std::string call_kind(std::string_view templateId) {
  if (templateId == "verification") return "verify";
  if (templateId == "clarification-form") return "form";
  return "plan";
}

// Reports each model call (template, step, reply) before handing the reply
// back. Plan-kind calls also carry the observation the step saw, which is
// what a replay needs to rebuild the page sequence.
class TracingClient : public ModelClient {
 public:
  TracingClient(ModelClient& inner, const EventSink& sink) : inner_(inner), sink_(sink) {}

  std::string complete(const ModelRequest& req) override {
    auto reply = inner_.complete(req);
    if (sink_) {
      Json p{{"call", true}, {"template", req.templateId}, {"step", req.stepIndex}, {"response", reply}};
      if (call_kind(req.templateId) == "plan") {
        p["observation"] = observation;
        p["screenshot"] = screenshot ? Json(*screenshot) : Json(nullptr);
      }
      sink_(call_kind(req.templateId), std::move(p));
    }
    return reply;
  }

  Json observation;
  std::optional<std::string> screenshot;

 private:
  ModelClient& inner_;
  const EventSink& sink_;
};

inline void answer_missing(std::vector<VerificationQuestion>& qs) {
  for (auto& q : qs)
    if (!q.answer) q.answer = Answer::UnanswerableProceed;
}

}  // namespace loop_detail

class AgentLoop {
 public:
  AgentLoop(ModelClient& gateway, Environment& env, PauseStrategy strategy, LoopOptions options = {},
            EventSink sink = {})
      : sink_(std::move(sink)), gateway_(gateway, sink_), env_(env), strategy_(strategy), options_(options) {}

  AgentLoop(const AgentLoop&) = delete;
  AgentLoop& operator=(const AgentLoop&) = delete;

  // Begins a task. The environment is used as it stands; reset it first
  // for a fresh page.
  void start(std::string command, std::optional<std::string> screenReader = std::nullopt) {
    if (status_ == LoopStatus::Running || paused()) throw BusyError("a task is already in progress");
    ctx_ = {};
    ctx_.command = std::move(command);
    ctx_.screenReader = std::move(screenReader);
    verification_ = {};
    decisions_.clear();
    pendingForm_.reset();
    pendingAction_.reset();
    pausedAt_.reset();
    lastError_.clear();
    iterations_ = 0;
    gathers_ = 0;
    status_ = LoopStatus::Running;
    emit("command", {{"text", ctx_.command},
                     {"strategy", std::string(to_string(strategy_.kind))},
                     {"screenReader", ctx_.screenReader ? Json(*ctx_.screenReader) : Json(nullptr)}});
  }

  // Steps until the task finishes, fails or pauses.
  LoopStatus run() {
    while (status_ == LoopStatus::Running) advance();
    return status_;
  }

  // One decision step; a no-op unless running.
  LoopStatus advance() {
    if (status_ != LoopStatus::Running) return status_;
    try {
      if (iterations_ >= options_.maxSteps)
        throw StepBudgetError("step budget of " + std::to_string(options_.maxSteps) + " exhausted");
      ++iterations_;
      step();
    } catch (const Error& e) {
      fail(e);
    }
    return status_;
  }

  // Records an event in the loop's stream (guidance, verdicts).
  void note(const std::string& kind, Json payload) { emit(kind, std::move(payload)); }

  // Answers the pending clarification form and keeps going on the next run().
  void resume(const ClarificationResponse& response) {
    if (status_ != LoopStatus::PausedClarify || !pendingForm_) throw StateError("no clarification is pending");
    ctx_ = apply_response(ctx_, *pendingForm_, response);
    emit("clarification", {{"response", to_json(ctx_.clarifications.back())}});
    pendingForm_.reset();
    gathers_ = 0;
    status_ = LoopStatus::Running;
  }

  // Resolves a side-effect confirmation. Approval executes the held action;
  // refusal ends the task without it.
  void confirm(bool approve) {
    if (status_ != LoopStatus::PausedConfirm || !pendingAction_) throw StateError("no confirmation is pending");
    emit("clarification", {{"confirm", approve}});
    auto action = *pendingAction_;
    pendingAction_.reset();
    status_ = LoopStatus::Running;
    if (!approve) {
      status_ = LoopStatus::Finished;
      return;
    }
    try {
      act(action);
    } catch (const Error& e) {
      fail(e);
    }
  }

  // "Let the agent decide" for the pending form.
  ClarificationResponse escape_response() const {
    if (!pendingForm_) throw StateError("no clarification is pending");
    ClarificationResponse r;
    r.formId = pendingForm_->formId;
    r.escape = true;
    r.submittedAt = now_ms();
    return r;
  }

  LoopStatus status() const { return status_; }
  bool paused() const { return status_ == LoopStatus::PausedClarify || status_ == LoopStatus::PausedConfirm; }
  const StepContext& context() const { return ctx_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  const std::optional<ClarificationForm>& pending_form() const { return pendingForm_; }
  const std::optional<ActionDirective>& pending_action() const { return pendingAction_; }
  // Executed-action count when the loop first paused for clarification.
  std::optional<int> paused_at() const { return pausedAt_; }
  const std::string& last_error() const { return lastError_; }
  const PauseStrategy& strategy() const { return strategy_; }

 private:
  struct Proposal {
    AgentOutput output;
    ActionPlan plan;
    std::vector<VerificationQuestion> questions;
    bool sufficient = false;
    bool criticalIncomplete = false;
    ActionDirective candidate;
  };

  void emit(const std::string& kind, Json payload) {
    if (sink_) sink_(kind, std::move(payload));
  }

  void fail(const Error& e) {
    lastError_ = e.what();
    status_ = LoopStatus::Failed;
    emit("error", {{"message", lastError_}, {"step", ctx_.stepIndex}});
  }

  AgentOutput call_agent(const std::string& templateId, const std::map<std::string, std::string, std::less<>>& extras = {}) {
    return parse_agent_output(gateway_.complete(build_prompt(templateId, ctx_, extras, options_.prompt)));
  }

  static VerifyBlock inline_block(const AgentOutput& out) {
    return out.verifyBlock ? parse_verify_block(*out.verifyBlock) : VerifyBlock{};
  }

  Proposal propose() {
    Proposal p;
    switch (strategy_.kind) {
      case StrategyKind::Prompting: {
        p.output = call_agent("prompting");
        auto block = inline_block(p.output);
        p.questions = std::move(block.questions);
        loop_detail::answer_missing(p.questions);
        p.sufficient = block.detailsSufficient.value_or(false);
        p.candidate = p.output.action;
        break;
      }
      case StrategyKind::VerifyFirstStep: {
        auto frozen = generate_verification(ctx_, strategy_, gateway_, verification_, options_.prompt);
        p.output = call_agent("action", {{"verification", frozen.empty() ? "(none)" : render_questions(frozen)}});
        auto block = inline_block(p.output);
        p.questions = answer_frozen(std::move(frozen), block);
        p.sufficient = block.detailsSufficient.value_or(false);
        p.candidate = p.output.action;
        break;
      }
      case StrategyKind::VerifyPerStep: {
        p.questions = generate_verification(ctx_, strategy_, gateway_, verification_, options_.prompt);
        loop_detail::answer_missing(p.questions);
        p.sufficient = verification_.lastDetails.value_or(false);
        p.output = call_agent("action", {{"verification", p.questions.empty() ? "(none)" : render_questions(p.questions)}});
        p.candidate = p.output.action;
        break;
      }
      case StrategyKind::VerifyPerStepWithPlanning: {
        auto proposal = propose_step(ctx_, gateway_, options_.prompt);
        p.output = std::move(proposal.output);
        p.plan = std::move(proposal.plan);
        std::string note = p.output.plan.value_or("");
        if (note.empty())
          for (const auto& a : p.plan.critical) note += "critical: " + render_action(a) + "\n";
        p.questions = generate_verification(ctx_, strategy_, gateway_, verification_, options_.prompt, note);
        loop_detail::answer_missing(p.questions);
        p.sufficient = verification_.lastDetails.value_or(false);
        auto pending = pending_critical(p.plan, ctx_.history);
        p.criticalIncomplete = !pending.empty();
        p.candidate = p.criticalIncomplete ? pending.front() : p.output.action;
        break;
      }
    }
    if (p.plan.critical.empty() && p.plan.nonCritical.empty() && !p.candidate.is_finish())
      p.plan.nonCritical.push_back(p.candidate);
    return p;
  }

  void step() {
    ctx_.stepIndex = static_cast<int>(ctx_.history.size());
    ctx_.observation = env_.observe();
    gateway_.observation = to_json(ctx_.observation.dom);
    gateway_.screenshot = ctx_.observation.screenshotRef;

    auto p = propose();
    const bool safety = flag_side_effect(p.candidate, ctx_);
    auto decision = decide(p.criticalIncomplete, assess(p.questions, p.sufficient), safety);
    decision.actions = {p.candidate};
    if (decision.kind == DecisionKind::GatherMoreDetails && (p.candidate.is_finish() || gathers_ >= options_.maxGather)) {
      decision.kind = DecisionKind::PauseForClarification;
      decision.forced = true;
    }
    decisions_.push_back(decision);
    emit("decision", to_json(decision, ctx_.stepIndex));

    switch (decision.kind) {
      case DecisionKind::PauseForClarification:
        pause_for_clarification(decision, p.plan);
        return;
      case DecisionKind::ConfirmSideEffect:
        pendingAction_ = p.candidate;
        status_ = LoopStatus::PausedConfirm;
        emit("cue", {{"cue", "prompt"}, {"step", ctx_.stepIndex}, {"reason", "confirm"}, {"action", to_json(p.candidate)}});
        if (options_.autoConfirm) confirm(true);
        return;
      case DecisionKind::GatherMoreDetails:
        ++gathers_;
        act(p.candidate);
        return;
      case DecisionKind::ExecuteCritical:
      case DecisionKind::Proceed:
        gathers_ = 0;
        act(p.candidate);
        return;
    }
  }

  void pause_for_clarification(const Decision& decision, const ActionPlan& plan) {
    ClarificationForm form;
    try {
      form = build_form(decision.assessment, ctx_, gateway_, plan, options_.prompt);
    } catch (const ProtocolError& e) {
      emit("error", {{"message", std::string("clarification form fell back to a text field: ") + e.what()},
                     {"step", ctx_.stepIndex}});
      form = fallback_form(decision.assessment);
    }
    pendingForm_ = form;
    if (!pausedAt_) pausedAt_ = ctx_.stepIndex;
    status_ = LoopStatus::PausedClarify;
    emit("form", {{"form", to_json(form)}, {"step", ctx_.stepIndex}});
    emit("cue", {{"cue", "prompt"}, {"step", ctx_.stepIndex}, {"reason", "clarify"}});
  }

  ClarificationForm fallback_form(const AmbiguityAssessment& a) const {
    ClarificationForm form;
    form.formId = new_form_id();
    form.title = "The agent needs your input";
    FormField f;
    f.key = "answer";
    const auto* lead = a.lead_question();
    f.label = lead ? lead->text : "What should the agent do next?";
    f.kind = FieldKind::Text;
    form.fields.push_back(std::move(f));
    form.defaultsDisclosure = disclose_defaults(ctx_.observation.dom, {});
    return form;
  }

  void act(const ActionDirective& action) {
    auto done = env_.execute(action, static_cast<int>(ctx_.history.size()));
    emit("action", to_json(done));
    emit("cue", {{"cue", std::string(to_string(done.cue))}, {"step", done.stepIndex}});
    if (action.is_finish()) {
      status_ = LoopStatus::Finished;
      return;
    }
    ctx_.history.push_back(std::move(done));
  }

  EventSink sink_;
  loop_detail::TracingClient gateway_;
  Environment& env_;
  PauseStrategy strategy_;
  LoopOptions options_;

  LoopStatus status_ = LoopStatus::Idle;
  StepContext ctx_;
  VerificationState verification_;
  std::vector<Decision> decisions_;
  std::optional<ClarificationForm> pendingForm_;
  std::optional<ActionDirective> pendingAction_;
  std::optional<int> pausedAt_;
  std::string lastError_;
  int iterations_ = 0;
  int gathers_ = 0;
};

}  // namespace morae
