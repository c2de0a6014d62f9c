#include <set>

#include <catch_amalgamated.hpp>

#include "morae/decision.hpp"

using namespace morae;

namespace {

MockScript script(const char* json) { return MockScript::from_json(Json::parse(json)); }

StepContext context_with(std::vector<std::pair<std::string, std::string>> labels) {
  StepContext ctx;
  ctx.command = "buy sparkling water";
  int id = 0;
  for (auto& [tag, label] : labels) {
    InteractiveElement e;
    e.id = id++;
    e.tag = tag;
    e.ariaLabel = label;
    ctx.observation.dom.elements.push_back(e);
  }
  return ctx;
}

VerificationQuestion q(Answer a, int priority = 1, QuestionCategory c = QuestionCategory::Other) {
  return {"q" + std::to_string(priority), c, a, priority};
}

}  // namespace

TEST_CASE("plan partition", "[decision][plan]") {
  auto ctx = context_with({{"button", "Sort by price"}});
  SECTION("a critical sort action") {
    ScriptedMock mock(script(R"([{"template":"planning","response":
      "<Plan>1. Apply the price constraint first\ncritical: click(0) sort by price</Plan><Thought>sort</Thought><Action>click(0)</Action>"}])"));
    auto plan = plan_step(ctx, mock);
    CHECK(plan.critical == std::vector{ActionDirective::click(0)});
    CHECK(plan.nonCritical.empty());
  }
  SECTION("empty plan makes the action critical") {
    ScriptedMock mock(script(R"([{"response":"<Plan></Plan><Action>click(4)</Action>"}])"));
    auto plan = plan_step(ctx, mock);
    CHECK(plan.critical == std::vector{ActionDirective::click(4)});
    CHECK(plan.nonCritical.empty());
  }
  SECTION("tagged partitions stay disjoint") {
    ScriptedMock mock(script(R"([{"response":
      "<Plan>- critical: setValue(2, \"sparkling water\")\n- non-critical: click(5)\n- non-critical: click(7)\n- non critical: setValue(2, \"sparkling water\")</Plan><Action>setValue(2, \"sparkling water\")</Action>"}])"));
    auto plan = plan_step(ctx, mock);
    REQUIRE(plan.critical.size() == 1);
    REQUIRE(plan.nonCritical.size() == 2);
    std::set<std::string> crit, non;
    for (auto& a : plan.critical) crit.insert(render_action(a));
    for (auto& a : plan.nonCritical) non.insert(render_action(a));
    for (auto& c : crit) CHECK(non.count(c) == 0);
  }
  SECTION("pending critical actions ignore finish and executed ones") {
    ActionPlan plan{{ActionDirective::click(1), ActionDirective::finish(), ActionDirective::click(2)}, {}, ""};
    std::vector<ExecutedAction> hist{{ActionDirective::click(1), 0, "", 0, CueKind::Click}};
    CHECK(pending_critical(plan, hist) == std::vector{ActionDirective::click(2)});
  }
}

TEST_CASE("verify block grammar", "[decision][verify]") {
  auto block = parse_verify_block(
      "1. [selection] Are several waters equally cheap? -> yes\n"
      "2. [missing-detail] Did the user give a pack size? -> not important and proceed\n"
      "- [tie-break] Is 'cheapest' per unit or per pack? => Unanswerable and proceed\n"
      "Is this the right store?\n"
      "DETAILS: sufficient\n");
  REQUIRE(block.questions.size() == 4);
  CHECK(block.questions[0].category == QuestionCategory::Selection);
  CHECK(block.questions[0].answer == Answer::Yes);
  CHECK(block.questions[0].text == "Are several waters equally cheap?");
  CHECK(block.questions[1].answer == Answer::NotImportantProceed);
  CHECK(block.questions[2].category == QuestionCategory::TieBreak);
  CHECK(block.questions[2].answer == Answer::UnanswerableProceed);
  CHECK_FALSE(block.questions[3].answer);
  CHECK(block.questions[3].priority == 4);
  CHECK(block.detailsSufficient == true);
  CHECK_FALSE(parse_verify_block("1. x -> no").detailsSufficient.has_value());
}

TEST_CASE("verification strategies", "[decision][verify]") {
  auto ctx = context_with({{"button", "Add to cart"}});
  SECTION("verify-first samples three times and freezes the top five") {
    ScriptedMock mock(script(R"([
      {"template":"verification","step":0,"response":"<Verify>1. [selection] A? -> yes\n2. [other] B? -> no\n3. [other] C? -> no</Verify>"},
      {"template":"verification","step":0,"response":"<Verify>1. [other] b? -> no\n2. [other] D? -> no\n3. [other] E? -> no</Verify>"},
      {"template":"verification","step":0,"response":"<Verify>1. [other] F? -> no\n2. [selection] a -> yes\n3. [other] G? -> no</Verify>"}
    ])"));
    RecordingClient rec(mock);
    VerificationState state;
    PauseStrategy s{StrategyKind::VerifyFirstStep};
    auto first = generate_verification(ctx, s, rec, state);
    REQUIRE(first.size() == 5);
    // A and B were asked twice; A has the better priority.
    CHECK(first[0].text == "A?");
    CHECK(first[1].text == "B?");
    CHECK(first[2].text == "F?");
    for (auto& fq : first) CHECK_FALSE(fq.answer);
    CHECK(rec.count("verification") == 3);

    ctx.stepIndex = 1;
    ctx.observation.dom.elements.clear();
    CHECK(generate_verification(ctx, s, rec, state) == first);
    CHECK(rec.count("verification") == 3);
  }
  SECTION("verify-per-step asks again at every step") {
    ScriptedMock mock(script(R"([
      {"template":"verification","step":0,"response":"<Verify>1. [other] Is the store right? -> no</Verify>"},
      {"template":"verification","step":1,"response":"<Verify>1. [selection] Which flavor? -> yes\nDETAILS: sufficient</Verify>"}
    ])"));
    VerificationState state;
    PauseStrategy s{StrategyKind::VerifyPerStep};
    auto a = generate_verification(ctx, s, mock, state);
    ctx.stepIndex = 1;
    auto b = generate_verification(ctx, s, mock, state);
    CHECK(a != b);
    CHECK(state.lastDetails == true);
  }
  SECTION("zero questions is valid") {
    ScriptedMock mock(script(R"([{"response":"<Verify></Verify>"}])"));
    VerificationState state;
    CHECK(generate_verification(ctx, PauseStrategy{StrategyKind::VerifyPerStep}, mock, state).empty());
  }
  SECTION("prompting has no verification pass") {
    ScriptedMock mock(script(R"([{"response":"x"}])"));
    VerificationState state;
    CHECK_THROWS_AS(generate_verification(ctx, PauseStrategy{StrategyKind::Prompting}, mock, state), UsageError);
  }
  SECTION("frozen answers are copied by position") {
    std::vector<VerificationQuestion> frozen{{"A?", QuestionCategory::Selection, std::nullopt, 1},
                                             {"B?", QuestionCategory::Other, std::nullopt, 2}};
    auto answered = answer_frozen(frozen, parse_verify_block("1. A? -> yes"));
    CHECK(answered[0].answer == Answer::Yes);
    CHECK(answered[1].answer == Answer::UnanswerableProceed);
    CHECK(answered[0].text == "A?");
  }
}

TEST_CASE("ambiguity and sufficiency indicators", "[decision][assess]") {
  CHECK_FALSE(assess({q(Answer::No), q(Answer::UnanswerableProceed, 2)}, true).ambiguous);
  auto a = assess({q(Answer::No), q(Answer::Yes, 2)}, true);
  CHECK(a.ambiguous);
  CHECK(a.sufficient);
  CHECK_FALSE(assess({}, false).ambiguous);
  CHECK_THROWS_AS(assess({VerificationQuestion{"x", QuestionCategory::Other, std::nullopt, 1}}, true), ContractError);
}

TEST_CASE("lead question is the best-priority yes", "[decision][assess]") {
  auto a = assess({q(Answer::No, 1), q(Answer::Yes, 3, QuestionCategory::TieBreak),
                   q(Answer::Yes, 2, QuestionCategory::Selection)},
                  true);
  REQUIRE(a.lead_question());
  CHECK(a.lead_question()->category == QuestionCategory::Selection);
}

TEST_CASE("decision routing examples", "[decision][decide]") {
  AmbiguityAssessment amb{{}, true, true};
  CHECK(decide(false, amb, false).kind == DecisionKind::PauseForClarification);
  amb.sufficient = false;
  CHECK(decide(false, amb, false).kind == DecisionKind::GatherMoreDetails);
  AmbiguityAssessment clear{{}, false, false};
  CHECK(decide(false, clear, true).kind == DecisionKind::ConfirmSideEffect);
  CHECK(decide(true, clear, false).kind == DecisionKind::ExecuteCritical);
  CHECK(decide(false, clear, false).kind == DecisionKind::Proceed);
}

TEST_CASE("side-effect lexicon", "[decision][safety]") {
  auto ctx = context_with({{"button", "Place order"},
                           {"button", "Add to cart"},
                           {"input", "Search"},
                           {"button", "Delete file"},
                           {"button", "Sender details"},
                           {"button", "CHECKOUT now"}});
  CHECK(flag_side_effect(ActionDirective::click(0), ctx));
  CHECK_FALSE(flag_side_effect(ActionDirective::click(1), ctx));
  CHECK_FALSE(flag_side_effect(ActionDirective::set_value(2, "sparkling water"), ctx));
  CHECK(flag_side_effect(ActionDirective::click(3), ctx));
  CHECK_FALSE(flag_side_effect(ActionDirective::click(4), ctx));
  CHECK(flag_side_effect(ActionDirective::click(5), ctx));
  CHECK_FALSE(flag_side_effect(ActionDirective::click(42), ctx));
  CHECK_FALSE(flag_side_effect(ActionDirective::finish(), ctx));
}

TEST_CASE("strategy names", "[decision]") {
  CHECK(strategy_from("verify-plan").kind == StrategyKind::VerifyPerStepWithPlanning);
  CHECK(strategy_from("verify-first").resampleCount == 3);
  CHECK(strategy_from("verify-first").topK == 5);
  CHECK_THROWS_AS(strategy_from("nope"), ConfigError);
}
