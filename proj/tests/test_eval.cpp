#include <cmath>
#include <fstream>
#include <random>

#include <catch_amalgamated.hpp>

#include "morae/eval.hpp"
#include "support/suite.hpp"

using namespace morae;

namespace {

TaskRecord task(std::optional<int> pauseStep) {
  TaskRecord t;
  t.taskId = "t";
  t.query = "q";
  t.groundTruth = {ActionDirective::click(0), ActionDirective::click(1), ActionDirective::click(2),
                   ActionDirective::finish()};
  t.pauseStep = pauseStep;
  return t;
}

RunOutcome outcome(std::optional<int> pausedAt, bool completed = false) {
  RunOutcome o;
  o.taskId = "t";
  o.pausedAt = pausedAt;
  o.completedAll = completed;
  return o;
}

// Micro F1 by hand: 2PR/(P+R).
double f1_oracle(double p, double r) { return 2 * p * r / (p + r); }

}  // namespace

TEST_CASE("pause scoring table", "[eval][scoring]") {
  struct Row {
    const char* name;
    std::optional<int> pauseStep;
    std::optional<int> pausedAt;
    bool completed;
    PauseClass expected;
  };
  const Row rows[] = {
      {"pause at the annotated step", 2, 2, false, PauseClass::TP},
      {"pause at step zero when annotated zero", 0, 0, false, PauseClass::TP},
      {"premature pause", 2, 1, false, PauseClass::FP},
      {"premature pause at zero", 2, 0, false, PauseClass::FP},
      {"late pause after missing the step", 2, 3, false, PauseClass::FN},
      {"never paused on a pause task", 2, std::nullopt, true, PauseClass::FN},
      {"never paused and stopped", 2, std::nullopt, false, PauseClass::FN},
      {"any pause on a no-pause task", std::nullopt, 1, false, PauseClass::FP},
      {"completed a no-pause task", std::nullopt, std::nullopt, true, PauseClass::TN},
      {"stopped short on a no-pause task", std::nullopt, std::nullopt, false, PauseClass::Excluded},
  };
  for (const auto& r : rows) {
    INFO(r.name);
    CHECK(score_pause_outcome(task(r.pauseStep), outcome(r.pausedAt, r.completed)) == r.expected);
  }
  auto o = outcome(1);
  o.taskId = "other";
  CHECK_THROWS_AS(score_pause_outcome(task(1), o), UsageError);
  CHECK(run_succeeded(PauseClass::TP));
  CHECK(run_succeeded(PauseClass::TN));
  CHECK_FALSE(run_succeeded(PauseClass::FP));
  CHECK_FALSE(run_succeeded(PauseClass::FN));
  CHECK_FALSE(run_succeeded(PauseClass::Excluded));
}

TEST_CASE("micro-averaged metrics", "[eval][metrics]") {
  PauseConfusion c{7, 1, 1, 7, 0};
  auto r = compute_metrics(c, {});
  CHECK(r.precision.value == Catch::Approx(87.5));
  CHECK(r.recall.value == Catch::Approx(87.5));
  CHECK(r.f1.value == Catch::Approx(87.5));
  CHECK(r.successRateOverall.undefined);

  auto empty = compute_metrics({}, {});
  CHECK(empty.precision.undefined);
  CHECK(empty.recall.undefined);
  CHECK(empty.f1.undefined);

  SECTION("F1 property against the closed form") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<long long> d(0, 500);
    for (int i = 0; i < 2000; ++i) {
      PauseConfusion m{d(rng), d(rng), d(rng), d(rng), 0};
      auto out = compute_metrics(m, {});
      if (m.tp == 0) {
        CHECK(out.f1.undefined);
        continue;
      }
      const double p = 100.0 * m.tp / (m.tp + m.fp), rr = 100.0 * m.tp / (m.tp + m.fn);
      REQUIRE(out.f1.value == Catch::Approx(f1_oracle(p, rr)).epsilon(1e-12));
      REQUIRE(out.f1.value <= std::max(out.precision.value, out.recall.value) + 1e-9);
      REQUIRE(out.f1.value >= std::min(out.precision.value, out.recall.value) - 1e-9);
    }
  }
  SECTION("success rates average over repeats") {
    std::vector<RepeatTally> t{{8, 8, 8, 4}, {8, 4, 8, 8}};
    auto out = compute_metrics({}, t);
    CHECK(out.successRatePauseRequired.value == Catch::Approx(75.0));
    CHECK(out.successRateNoPause.value == Catch::Approx(75.0));
    CHECK(out.successRateOverall.value == Catch::Approx(75.0));
    std::vector<RepeatTally> noPauseOnly{{0, 0, 4, 1}};
    auto np = compute_metrics({}, noPauseOnly);
    CHECK(np.successRatePauseRequired.undefined);
    CHECK(np.successRateNoPause.value == Catch::Approx(25.0));
  }
}

TEST_CASE("decision entropy", "[eval][entropy]") {
  CHECK(decision_entropy({{"a", 5}}) == 0.0);
  CHECK(decision_entropy({{"a", 5}, {"b", 0}}) == 0.0);
  CHECK(decision_entropy({{"a", 3}, {"b", 3}}) == Catch::Approx(1.0).margin(1e-12));
  CHECK(decision_entropy({{"a", 1}, {"b", 1}, {"c", 1}}) == Catch::Approx(std::log2(3.0)).margin(1e-12));
  CHECK(decision_entropy({{"a", 1}, {"b", 1}}, std::exp(1.0)) == Catch::Approx(std::log(2.0)));
  CHECK_THROWS_AS(decision_entropy({}), UsageError);
  CHECK_THROWS_AS(decision_entropy({{"a", 0}}), UsageError);
  CHECK_THROWS_AS(decision_entropy({{"a", -1}, {"b", 2}}), UsageError);
  CHECK_THROWS_AS(decision_entropy({{"a", 1}}, 1.0), UsageError);

  std::mt19937 rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::map<std::string, long long> m;
    const int k = 1 + static_cast<int>(rng() % 12);
    long long total = 0;
    for (int j = 0; j < k; ++j) total += m["o" + std::to_string(j)] = rng() % 50;
    if (total == 0) continue;
    int support = 0;
    for (auto& [_, c] : m) support += c > 0;
    const double h = decision_entropy(m);
    REQUIRE(h >= 0.0);
    REQUIRE(h <= std::log2(static_cast<double>(support)) + 1e-9);
  }
}

TEST_CASE("dataset loading", "[eval][dataset]") {
  auto tasks = suite::tasks();
  REQUIRE(tasks.size() == 16);
  int pause = 0;
  for (const auto& t : tasks) {
    pause += t.pause_required();
    CHECK(std::filesystem::exists(t.fixturePath));
    CHECK(t.groundTruth.back().is_finish());
  }
  CHECK(pause == 8);

  suite::TempDir tmp("morae-ds");
  auto write = [&](const std::string& body) {
    std::ofstream(tmp.path / "d.jsonl") << body;
    return tmp.path / "d.jsonl";
  };
  auto p = write(R"({"taskId":"a","query":"q","fixture":"f.json","groundTruth":[{"kind":"finish"}],"pauseStep":null})"
                 "\n\n");
  auto one = load_dataset(p);
  REQUIRE(one.size() == 1);
  CHECK(one[0].fixturePath == tmp.path / "f.json");
  CHECK_FALSE(one[0].pauseStep);

  auto bad = write("{\"taskId\":\"a\",\"query\":\"q\",\"fixture\":\"f\",\"groundTruth\":[]}\nnot json\n");
  try {
    load_dataset(bad);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_dataset(write(R"({"taskId":"a","query":"q","fixture":"f","groundTruth":[],"pauseStep":3})")),
                  LoadError);
  CHECK_THROWS_AS(load_dataset(tmp.path / "missing.jsonl"), LoadError);
}

TEST_CASE("aggregate scores runs and their outcome spread", "[eval]") {
  auto a = task(2);
  a.taskId = "a";
  auto b = task(std::nullopt);
  b.taskId = "b";
  std::vector<RunOutcome> runs;
  auto run = [&](std::string id, int rep, std::optional<int> at, bool done) {
    RunOutcome o;
    o.taskId = std::move(id);
    o.repeatIndex = rep;
    o.pausedAt = at;
    o.completedAll = done;
    runs.push_back(o);
  };
  run("a", 0, 2, false);
  run("b", 0, std::nullopt, true);
  run("a", 1, 1, false);
  run("b", 1, std::nullopt, true);
  auto r = aggregate({a, b}, runs, 2, "verify-plan");
  CHECK(r.confusion == PauseConfusion{1, 1, 0, 2, 0});
  CHECK(r.successRatePauseRequired.value == Catch::Approx(50.0));
  CHECK(r.successRateNoPause.value == Catch::Approx(100.0));
  CHECK(r.entropyByTask.at("a") == Catch::Approx(1.0));
  CHECK(r.entropyByTask.at("b") == 0.0);
  auto j = to_json(r);
  CHECK(j["confusion"]["tp"] == 1);
  CHECK(j["strategy"] == "verify-plan");
  CHECK_THROWS_AS(aggregate({a}, runs, 2), UsageError);
  CHECK_THROWS_AS(aggregate({a, b}, runs, 1), UsageError);
}

TEST_CASE("synthetic suite under verify-plan", "[eval][suite]") {
  auto tasks = suite::tasks();
  BenchmarkOptions opts;
  opts.repeats = 1;
  auto report = run_benchmark(tasks, strategy_from("verify-plan"), suite::mock_clients(), opts);
  CHECK(report.confusion == PauseConfusion{7, 1, 1, 7, 0});
  REQUIRE(report.runs.size() == 16);
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    INFO(report.runs[i].taskId << " " << report.runs[i].error);
    CHECK(report.runs[i].error.empty());
    CHECK(report.classes[i] == suite::verify_plan_classes().at(report.runs[i].taskId));
  }
  CHECK(report.successRatePauseRequired.value == Catch::Approx(87.5));
  CHECK(report.successRateNoPause.value == Catch::Approx(87.5));
}

TEST_CASE("benchmark records task failures and keeps going", "[eval]") {
  auto tasks = suite::tasks();
  tasks.resize(2);
  tasks[0].fixturePath = "/nonexistent.json";
  BenchmarkOptions opts;
  opts.repeats = 1;
  auto report = run_benchmark(tasks, strategy_from("verify-plan"), suite::mock_clients(), opts);
  REQUIRE(report.runs.size() == 2);
  CHECK_FALSE(report.runs[0].error.empty());
  CHECK(report.runs[1].error.empty());
}
