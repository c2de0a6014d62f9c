#pragma once

// Benchmark harness: annotated tasks in, pause scoring and rates out.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "morae/agent_loop.hpp"
#include "morae/environment.hpp"
#include "morae/errors.hpp"
#include "morae/trace.hpp"

namespace morae {

struct TaskRecord {
  std::string taskId;
  std::string category;
  std::string query;
  std::filesystem::path fixturePath;
  std::vector<ActionDirective> groundTruth;
  // Executed-action count at which the user must be asked; absent for
  // tasks that should run through.
  std::optional<int> pauseStep;

  bool pause_required() const { return pauseStep.has_value(); }
};

// One JSON object per line. Relative fixture paths resolve against
// `fixtureDir`, or the dataset's directory when that is empty.
inline std::vector<TaskRecord> load_dataset(const std::filesystem::path& path, std::filesystem::path fixtureDir = {}) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset " + path.string());
  if (fixtureDir.empty()) fixtureDir = path.parent_path();
  std::vector<TaskRecord> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (text::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineNo);
    try {
      auto j = Json::parse(line);
      TaskRecord t;
      t.taskId = j.at("taskId").get<std::string>();
      t.category = j.value("category", std::string());
      t.query = j.at("query").get<std::string>();
      t.fixturePath = resolve_fixture(j.at("fixture").get<std::string>(), fixtureDir);
      const auto& gt = j.at("groundTruth");
      if (!gt.is_array()) throw LoadError(where + ": groundTruth must be a list");
      for (std::size_t i = 0; i < gt.size(); ++i)
        t.groundTruth.push_back(action_from_json(gt[i], "$.groundTruth[" + std::to_string(i) + "]"));
      if (auto p = j.find("pauseStep"); p != j.end() && !p->is_null()) {
        t.pauseStep = p->get<int>();
        if (*t.pauseStep < 0 || *t.pauseStep > static_cast<int>(t.groundTruth.size()))
          throw LoadError(where + ": pauseStep beyond the ground-truth path");
      }
      out.push_back(std::move(t));
    } catch (const LoadError&) {
      throw;
    } catch (const Json::exception& e) {
      throw LoadError(where + ": " + e.what());
    } catch (const ParseError& e) {
      throw LoadError(where + " at " + e.path() + ": " + e.what());
    }
  }
  return out;
}

struct RunOutcome {
  std::string taskId;
  int repeatIndex = 0;
  std::optional<int> pausedAt;
  bool completedAll = false;
  int stepsTaken = 0;
  std::vector<DecisionKind> decisions;
  std::string error;
};

enum class PauseClass { TP, FP, FN, TN, Excluded };

inline std::string_view to_string(PauseClass c) {
  switch (c) {
    case PauseClass::TP: return "TP";
    case PauseClass::FP: return "FP";
    case PauseClass::FN: return "FN";
    case PauseClass::TN: return "TN";
    case PauseClass::Excluded: return "Excluded";
  }
  return "?";
}

inline PauseClass score_pause_outcome(const TaskRecord& record, const RunOutcome& outcome) {
  if (record.taskId != outcome.taskId)
    throw UsageError("outcome for '" + outcome.taskId + "' scored against task '" + record.taskId + "'");
  if (record.pauseStep) {
    if (outcome.pausedAt == record.pauseStep) return PauseClass::TP;
    if (outcome.pausedAt && *outcome.pausedAt < *record.pauseStep) return PauseClass::FP;
    return PauseClass::FN;
  }
  if (outcome.pausedAt) return PauseClass::FP;
  return outcome.completedAll ? PauseClass::TN : PauseClass::Excluded;
}

// A run succeeds by pausing exactly where annotated, or by completing a
// no-pause task without pausing.
inline bool run_succeeded(PauseClass c) { return c == PauseClass::TP || c == PauseClass::TN; }

struct PauseConfusion {
  long long tp = 0, fp = 0, fn = 0, tn = 0, excluded = 0;

  void add(PauseClass c) {
    switch (c) {
      case PauseClass::TP: ++tp; break;
      case PauseClass::FP: ++fp; break;
      case PauseClass::FN: ++fn; break;
      case PauseClass::TN: ++tn; break;
      case PauseClass::Excluded: ++excluded; break;
    }
  }
  bool operator==(const PauseConfusion&) const = default;
};

// Percentages. A zero denominator gives 0 and sets the flag.
struct Rate {
  double value = 0.0;
  bool undefined = false;
};

inline Rate percent(double num, double den) {
  if (den == 0) return {0.0, true};
  return {100.0 * num / den, false};
}

inline Rate f1_score(Rate precision, Rate recall) {
  if (precision.undefined || recall.undefined || precision.value + recall.value == 0) return {0.0, true};
  return {2 * precision.value * recall.value / (precision.value + recall.value), false};
}

// Per-repeat success tallies.
struct RepeatTally {
  int pauseRequired = 0, pauseRequiredSucceeded = 0;
  int noPause = 0, noPauseSucceeded = 0;
};

struct EvalReport {
  std::string strategy;
  Rate successRatePauseRequired, successRateNoPause, successRateOverall;
  Rate precision, recall, f1;
  PauseConfusion confusion;
  std::map<std::string, double> entropyByTask;
  int repeats = 0;
  std::vector<RunOutcome> runs;
  std::vector<PauseClass> classes;
};

// Shannon entropy of a choice distribution.
inline double decision_entropy(const std::map<std::string, long long>& counts, double logBase = 2.0) {
  if (!(logBase > 0) || logBase == 1.0) throw UsageError("entropy log base must be positive and not 1");
  long long total = 0;
  for (const auto& [_, c] : counts) {
    if (c < 0) throw UsageError("negative choice count");
    total += c;
  }
  if (total == 0) throw UsageError("entropy of an empty distribution");
  double h = 0;
  for (const auto& [_, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h / std::log(logBase) + 0.0;
}

// Micro-averaged P/R/F1 over the summed confusion; success rates are the
// mean of the per-repeat rates.
inline EvalReport compute_metrics(const PauseConfusion& confusion, const std::vector<RepeatTally>& perRepeat) {
  EvalReport r;
  r.confusion = confusion;
  r.repeats = static_cast<int>(perRepeat.size());
  r.precision = percent(static_cast<double>(confusion.tp), static_cast<double>(confusion.tp + confusion.fp));
  r.recall = percent(static_cast<double>(confusion.tp), static_cast<double>(confusion.tp + confusion.fn));
  r.f1 = f1_score(r.precision, r.recall);

  auto mean = [&](auto num, auto den) {
    Rate out{0.0, true};
    double sum = 0;
    int n = 0;
    for (const auto& t : perRepeat) {
      auto rate = percent(num(t), den(t));
      if (rate.undefined) continue;
      sum += rate.value;
      ++n;
    }
    if (n > 0) out = {sum / n, false};
    return out;
  };
  r.successRatePauseRequired =
      mean([](const RepeatTally& t) { return double(t.pauseRequiredSucceeded); }, [](const RepeatTally& t) { return double(t.pauseRequired); });
  r.successRateNoPause =
      mean([](const RepeatTally& t) { return double(t.noPauseSucceeded); }, [](const RepeatTally& t) { return double(t.noPause); });
  r.successRateOverall = mean([](const RepeatTally& t) { return double(t.pauseRequiredSucceeded + t.noPauseSucceeded); },
                              [](const RepeatTally& t) { return double(t.pauseRequired + t.noPause); });
  return r;
}

// Scores outcomes against their tasks and aggregates them.
inline EvalReport aggregate(const std::vector<TaskRecord>& tasks, const std::vector<RunOutcome>& runs, int repeats,
                            std::string strategy = {}) {
  if (repeats < 1) throw UsageError("repeats must be at least 1");
  std::map<std::string, const TaskRecord*> byId;
  for (const auto& t : tasks) byId[t.taskId] = &t;
  PauseConfusion confusion;
  std::vector<RepeatTally> tallies(static_cast<std::size_t>(repeats));
  std::vector<PauseClass> classes;
  std::map<std::string, std::map<std::string, long long>> signatures;
  for (const auto& run : runs) {
    auto it = byId.find(run.taskId);
    if (it == byId.end()) throw UsageError("outcome for unknown task '" + run.taskId + "'");
    const auto& task = *it->second;
    const auto c = score_pause_outcome(task, run);
    classes.push_back(c);
    confusion.add(c);
    if (run.repeatIndex < 0 || run.repeatIndex >= repeats) throw UsageError("repeat index out of range");
    auto& t = tallies[static_cast<std::size_t>(run.repeatIndex)];
    if (task.pause_required()) {
      ++t.pauseRequired;
      t.pauseRequiredSucceeded += run_succeeded(c);
    } else {
      ++t.noPause;
      t.noPauseSucceeded += run_succeeded(c);
    }
    std::string sig = run.pausedAt ? "paused@" + std::to_string(*run.pausedAt)
                                   : (run.completedAll ? "completed" : "stopped@" + std::to_string(run.stepsTaken));
    ++signatures[run.taskId][sig];
  }
  auto report = compute_metrics(confusion, tallies);
  report.strategy = std::move(strategy);
  report.runs = runs;
  report.classes = std::move(classes);
  for (const auto& [id, counts] : signatures) report.entropyByTask[id] = decision_entropy(counts);
  return report;
}

inline Json to_json(const Rate& r) { return {{"value", r.value}, {"undefined", r.undefined}}; }

inline Json to_json(const EvalReport& r) {
  Json j;
  j["strategy"] = r.strategy;
  j["repeats"] = r.repeats;
  j["successRatePauseRequired"] = to_json(r.successRatePauseRequired);
  j["successRateNoPause"] = to_json(r.successRateNoPause);
  j["successRateOverall"] = to_json(r.successRateOverall);
  j["precision"] = to_json(r.precision);
  j["recall"] = to_json(r.recall);
  j["f1"] = to_json(r.f1);
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"fn", r.confusion.fn},
                    {"tn", r.confusion.tn},
                    {"excluded", r.confusion.excluded}};
  j["entropyByTask"] = Json::object();
  for (const auto& [k, v] : r.entropyByTask) j["entropyByTask"][k] = v;
  j["runs"] = Json::array();
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& run = r.runs[i];
    Json rj{{"taskId", run.taskId},
            {"repeat", run.repeatIndex},
            {"pausedAt", run.pausedAt ? Json(*run.pausedAt) : Json(nullptr)},
            {"completedAll", run.completedAll},
            {"stepsTaken", run.stepsTaken}};
    if (i < r.classes.size()) rj["class"] = std::string(to_string(r.classes[i]));
    rj["decisions"] = Json::array();
    for (auto d : run.decisions) rj["decisions"].push_back(std::string(to_string(d)));
    if (!run.error.empty()) rj["error"] = run.error;
    j["runs"].push_back(std::move(rj));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Running a suite

// Builds the model client for one task run (a scripted mock needs the task id).
using ClientFactory = std::function<std::shared_ptr<ModelClient>(const TaskRecord&, int repeatIndex)>;

struct BenchmarkOptions {
  int repeats = 3;
  LoopOptions loop{20, 3, true, {}};
  // When set, each run writes <traceDir>/<taskId>.r<repeat>.jsonl.
  std::filesystem::path traceDir;
};

inline std::filesystem::path run_trace_path(const std::filesystem::path& dir, const std::string& taskId, int repeat) {
  return dir / (taskId + ".r" + std::to_string(repeat) + ".jsonl");
}

// Runs one task once on a fresh page and reports how it ended.
inline RunOutcome run_task(const TaskRecord& task, int repeat, ModelClient& client, Environment& env,
                           const PauseStrategy& strategy, const LoopOptions& options, EventSink sink = {}) {
  RunOutcome out;
  out.taskId = task.taskId;
  out.repeatIndex = repeat;
  env.reset();
  AgentLoop loop(client, env, strategy, options, std::move(sink));
  loop.start(task.query);
  loop.run();
  out.pausedAt = loop.paused_at();
  out.stepsTaken = static_cast<int>(loop.context().history.size());
  for (const auto& d : loop.decisions()) out.decisions.push_back(d.kind);
  out.error = loop.last_error();
  if (loop.status() == LoopStatus::Finished && !out.pausedAt) {
    std::vector<ActionDirective> done, expected;
    for (const auto& h : loop.context().history) done.push_back(h.directive);
    for (const auto& a : task.groundTruth)
      if (!a.is_finish()) expected.push_back(a);
    out.completedAll = done == expected;
  }
  return out;
}

// Every task x repeat on a reset environment. Task-level failures (bad
// fixture, model errors) are recorded in the outcome and never stop the sweep.
inline EvalReport run_benchmark(const std::vector<TaskRecord>& tasks, const PauseStrategy& strategy,
                                const ClientFactory& clients, const BenchmarkOptions& options = {}) {
  if (options.repeats < 1) throw UsageError("repeats must be at least 1");
  std::vector<RunOutcome> runs;
  std::map<std::filesystem::path, std::shared_ptr<const Fixture>> fixtures;
  for (int rep = 0; rep < options.repeats; ++rep) {
    for (const auto& task : tasks) {
      RunOutcome failed{task.taskId, rep, std::nullopt, false, 0, {}, {}};
      try {
        auto& fx = fixtures[task.fixturePath];
        if (!fx) fx = std::make_shared<const Fixture>(Fixture::load(task.fixturePath));
        ReplayEnvironment env(fx);
        auto client = clients(task, rep);
        std::unique_ptr<EventLog> log;
        if (!options.traceDir.empty()) {
          auto path = run_trace_path(options.traceDir, task.taskId, rep);
          std::filesystem::remove(path);
          log = std::make_unique<EventLog>(task.taskId + "-r" + std::to_string(rep), path);
        }
        runs.push_back(run_task(task, rep, *client, env, strategy, options.loop, log ? log->sink() : EventSink{}));
        if (log) log->sync();
      } catch (const Error& e) {
        failed.error = e.what();
        runs.push_back(std::move(failed));
      }
    }
  }
  return aggregate(tasks, runs, options.repeats, std::string(to_string(strategy.kind)));
}

}  // namespace morae
