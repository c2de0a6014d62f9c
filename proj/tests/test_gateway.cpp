#include <catch_amalgamated.hpp>

#include "morae/gateway.hpp"
#include "morae/http_gateway.hpp"
#include "morae/prompts.hpp"

using namespace morae;

namespace {

StepContext sample_context() {
  StepContext ctx;
  ctx.command = "add the cheapest sweetened sparkling water to my cart";
  InteractiveElement e;
  e.id = 0;
  e.tag = "button";
  e.ariaLabel = "Add to cart";
  ctx.observation.dom.elements.push_back(e);
  return ctx;
}

ModelRequest simple_request(std::string templateId = "planning", int step = 0) {
  ModelRequest r;
  r.systemPrompt = "sys";
  r.messages.push_back({Role::User, "hello", std::nullopt});
  r.templateId = std::move(templateId);
  r.stepIndex = step;
  return r;
}

}  // namespace

TEST_CASE("agent output grammar", "[gateway][parse]") {
  SECTION("thought and click") {
    auto out = parse_agent_output("<Thought>sorting first</Thought><Action>click(3)</Action>");
    CHECK(out.thought == "sorting first");
    CHECK(out.action == ActionDirective::click(3));
    CHECK_FALSE(out.plan);
  }
  SECTION("finish") { CHECK(parse_agent_output("<Action>finish()</Action>").action.is_finish()); }
  SECTION("no tags") { CHECK_THROWS_AS(parse_agent_output("no tags at all"), ProtocolError); }
  SECTION("unknown action kind") {
    try {
      parse_agent_output("<Action>hover(2)</Action>");
      FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
      CHECK(e.raw() == "<Action>hover(2)</Action>");
    }
  }
  SECTION("only the first block of each tag counts") {
    auto out = parse_agent_output(
        "<Plan>a</Plan><Plan>b</Plan><Action>click(1)</Action><Action>click(2)</Action>");
    CHECK(out.plan == "a");
    CHECK(out.action == ActionDirective::click(1));
  }
  SECTION("setValue with escapes") {
    auto out = parse_agent_output(R"(<Action>setValue(2, "say \"hi\" \\ bye")</Action>)");
    CHECK(out.action == ActionDirective::set_value(2, R"(say "hi" \ bye)"));
  }
  SECTION("malformed calls") {
    CHECK_THROWS_AS(parse_agent_output("<Action>click()</Action>"), ProtocolError);
    CHECK_THROWS_AS(parse_agent_output("<Action>setValue(1)</Action>"), ProtocolError);
    CHECK_THROWS_AS(parse_agent_output("<Action>click(1) now</Action>"), ProtocolError);
    CHECK_THROWS_AS(parse_agent_output("<Action>click(1)"), ProtocolError);
  }
}

TEST_CASE("render then parse preserves the action", "[gateway][property]") {
  std::mt19937 rng(7);
  const std::string alphabet = "ab \"\\()<>,x9";
  for (int i = 0; i < 2000; ++i) {
    AgentOutput o;
    const int kind = static_cast<int>(rng() % 3);
    if (kind == 0) o.action = ActionDirective::click(static_cast<int>(rng() % 500));
    if (kind == 1) {
      std::string v;
      for (int k = static_cast<int>(rng() % 12); k > 0; --k) v.push_back(alphabet[rng() % alphabet.size()]);
      o.action = ActionDirective::set_value(static_cast<int>(rng() % 500), v);
    }
    if (rng() % 2) o.thought = "t" + std::to_string(i);
    auto parsed = parse_agent_output(render_agent_output(o));
    REQUIRE(parsed.action == o.action);
    CHECK(parse_agent_output(render_agent_output(parsed)).action == parsed.action);
  }
}

TEST_CASE("scripted mock", "[gateway][mock]") {
  auto script = MockScript::from_json(Json::parse(R"([
    {"template":"planning","step":0,"response":"<Action>click(1)</Action>"},
    {"template":"verification","step":0,"response":"v0-a"},
    {"template":"verification","step":0,"response":"v0-b"},
    {"template":"verification","response":"v-any"},
    {"task":"t2","template":"planning","step":0,"response":"t2 plan"},
    {"response":"fallback"}
  ])"));

  SECTION("passthrough of the scripted text") {
    ScriptedMock mock(script);
    CHECK(mock.complete(simple_request("planning", 0)) == "<Action>click(1)</Action>");
  }
  SECTION("repeated requests walk the group, then stick to its last entry") {
    ScriptedMock mock(script);
    CHECK(mock.complete(simple_request("verification", 0)) == "v0-a");
    CHECK(mock.complete(simple_request("verification", 0)) == "v0-b");
    CHECK(mock.complete(simple_request("verification", 0)) == "v0-b");
    CHECK(mock.complete(simple_request("verification", 4)) == "v-any");
    CHECK(mock.complete(simple_request("ui-guidance", 1)) == "fallback");
  }
  SECTION("task filter") {
    ScriptedMock t2(script, "t2");
    CHECK(t2.complete(simple_request("planning", 0)) == "t2 plan");
  }
  SECTION("images are ignored") {
    ScriptedMock mock(script);
    auto r = simple_request("planning", 0);
    r.messages.back().imageRef = "shot-7";
    CHECK(mock.complete(r) == "<Action>click(1)</Action>");
  }
  SECTION("identical request sequences give identical responses") {
    ScriptedMock a(script), b(script);
    for (int i = 0; i < 6; ++i) {
      auto r = simple_request(i % 2 ? "verification" : "planning", i % 3);
      CHECK(a.complete(r) == b.complete(r));
    }
  }
  SECTION("no match is a gateway error") {
    ScriptedMock mock(MockScript::from_json(Json::parse(R"([{"template":"planning","response":"x"}])")));
    CHECK_THROWS_AS(mock.complete(simple_request("verification", 0)), GatewayError);
  }
  SECTION("digest pins an entry to one request") {
    auto r = simple_request("planning", 3);
    Json j = Json::array();
    j.push_back({{"digest", request_digest(r)}, {"response", "pinned"}});
    j.push_back({{"response", "other"}});
    ScriptedMock mock(MockScript::from_json(j));
    CHECK(mock.complete(r) == "pinned");
    auto r2 = r;
    r2.systemPrompt += "!";
    CHECK(mock.complete(r2) == "other");
  }
  SECTION("bad script shape") {
    CHECK_THROWS_AS(MockScript::from_json(Json::parse(R"({"a":1})")), ParseError);
    CHECK_THROWS_AS(MockScript::from_json(Json::parse(R"([{"step":"x","response":"r"}])")), ParseError);
  }
}

TEST_CASE("recording client counts calls per template", "[gateway][mock]") {
  ScriptedMock mock(MockScript::from_json(Json::parse(R"([{"response":"ok"}])")));
  RecordingClient rec(mock);
  rec.complete(simple_request("planning", 0));
  rec.complete(simple_request("verification", 0));
  rec.complete(simple_request("verification", 1));
  CHECK(rec.count("verification") == 2);
  CHECK(rec.calls().size() == 3);
  CHECK(rec.calls()[2].stepIndex == 1);
}

TEST_CASE("http client retries transient failures only", "[gateway][http]") {
  EndpointConfig cfg;
  cfg.url = "http://127.0.0.1:9/v1/chat/completions";
  cfg.apiKey = "k";
  cfg.maxAttempts = 3;
  cfg.initialBackoff = std::chrono::milliseconds(1);

  SECTION("transport failure exhausts the attempts") {
    int calls = 0;
    HttpModelClient client(cfg, [&](const std::string&, const Headers&, const std::string&) {
      ++calls;
      return HttpReply{0, {}, "Connection"};
    });
    CHECK_THROWS_AS(client.complete(simple_request()), GatewayError);
    CHECK(calls == 3);
  }
  SECTION("4xx is not retried") {
    int calls = 0;
    HttpModelClient client(cfg, [&](const std::string&, const Headers&, const std::string&) {
      ++calls;
      return HttpReply{400, "bad", {}};
    });
    CHECK_THROWS_AS(client.complete(simple_request()), GatewayError);
    CHECK(calls == 1);
  }
  SECTION("auth rejection is a credential error") {
    HttpModelClient client(cfg, [](const std::string&, const Headers&, const std::string&) {
      return HttpReply{401, "no", {}};
    });
    CHECK_THROWS_AS(client.complete(simple_request()), CredentialError);
  }
  SECTION("5xx then success") {
    int calls = 0;
    std::string seenBody;
    Headers seenHeaders;
    HttpModelClient client(cfg, [&](const std::string&, const Headers& h, const std::string& b) {
      seenBody = b;
      seenHeaders = h;
      return ++calls < 2 ? HttpReply{503, "", {}}
                         : HttpReply{200, R"({"choices":[{"message":{"content":"<Action>finish()</Action>"}}]})", {}};
    });
    CHECK(client.complete(simple_request()) == "<Action>finish()</Action>");
    CHECK(calls == 2);
    auto body = Json::parse(seenBody);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(std::find(seenHeaders.begin(), seenHeaders.end(),
                    std::pair<std::string, std::string>{"Authorization", "Bearer k"}) != seenHeaders.end());
  }
  SECTION("a real unreachable endpoint fails after three attempts") {
    HttpModelClient client(cfg);
    CHECK_THROWS_AS(client.complete(simple_request()), GatewayError);
    CHECK(client.attempts() == 3);
  }
  SECTION("missing URL") {
    EndpointConfig empty;
    CHECK_THROWS_AS(HttpModelClient(empty), ConfigError);
  }
}

TEST_CASE("prompt assembly", "[gateway][prompt]") {
  auto ctx = sample_context();
  SECTION("planning template carries the planning and verification guidelines") {
    auto r = build_prompt("planning", ctx);
    CHECK(r.systemPrompt.find("Balancing Execution and Ambiguity Verification") != std::string::npos);
    CHECK(r.systemPrompt.find("Planning Guidelines") != std::string::npos);
    CHECK(r.systemPrompt.find("Ambiguity Verification") != std::string::npos);
    CHECK(r.systemPrompt.find(ctx.command) != std::string::npos);
    CHECK(r.systemPrompt.find("{{") == std::string::npos);
    CHECK(r.temperature == 0.0);
    REQUIRE(r.messages.size() == 1);
    CHECK(r.messages[0].content.find(R"([0] button label="Add to cart")") != std::string::npos);
  }
  SECTION("history precedes the current observation") {
    ctx.history.push_back({ActionDirective::click(0), 0, "clicked", 0, CueKind::Click});
    ctx.stepIndex = 1;
    auto r = build_prompt("planning", ctx);
    REQUIRE(r.messages.size() == 2);
    CHECK(r.messages[0].role == Role::Assistant);
    CHECK(r.messages[0].content.find("click(0)") != std::string::npos);
    CHECK(r.messages[1].role == Role::User);
    CHECK(r.stepIndex == 1);
  }
  SECTION("screen reader choice reaches the guidance prompt") {
    auto r = build_prompt("ui-guidance", ctx, {{"screenReader", "NVDA"}, {"question", "How do I read mail?"}});
    CHECK(r.systemPrompt.find("NVDA") != std::string::npos);
  }
  SECTION("unknown template") { CHECK_THROWS_AS(build_prompt("foo", ctx), ConfigError); }
  SECTION("unresolved placeholder names itself") {
    try {
      build_prompt("ui-guidance", ctx);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("question") != std::string::npos);
    }
  }
  SECTION("every registered template resolves with its documented extras") {
    std::map<std::string, std::string, std::less<>> extras{
        {"question", "q"}, {"query", "q"}, {"questions", "1. q"}, {"defaults", "(none)"}, {"verification", "(none)"}};
    for (const auto& [id, _] : prompt_templates()) CHECK_NOTHROW(build_prompt(id, ctx, extras));
  }
  SECTION("clarifications are rendered") {
    ctx.clarifications.push_back({"f1", {{"flavor", "lime"}}, 0, false});
    auto r = build_prompt("planning", ctx);
    CHECK(r.systemPrompt.find("CLARIFIED:\n- flavor: lime") != std::string::npos);
  }
}
