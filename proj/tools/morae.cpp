// morae: command-line front end (serve, run, replay, eval).

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <unistd.h>

#include "morae/eval.hpp"
#include "morae/http_api.hpp"
#include "morae/http_gateway.hpp"

using namespace morae;

namespace {

struct Globals {
  std::string fixtureDir;
  double clarifyTimeout = 0;
};

std::shared_ptr<const MockScript> load_script(const std::string& path) {
  return std::make_shared<const MockScript>(MockScript::load(path));
}

// Scripted mock when a script is given, otherwise the configured endpoint.
std::shared_ptr<ModelClient> make_client(const std::shared_ptr<const MockScript>& script, const std::string& task,
                                         const std::filesystem::path& attachmentsBase, bool verifier = false) {
  if (script) return std::make_shared<ScriptedMock>(script, task);
  auto cfg = verifier ? EndpointConfig::verify_from_env() : EndpointConfig::from_env();
  return std::make_shared<HttpModelClient>(cfg, HttpPost{}, file_attachments(attachmentsBase));
}

std::string rate(const Rate& r) {
  if (r.undefined) return "n/a";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << r.value;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Terminal prompts for `run`

bool read_line(std::string& out) {
  std::cout << std::flush;
  return static_cast<bool>(std::getline(std::cin, out));
}

// Asks for every field; "!" anywhere lets the agent decide. Returns nullopt on EOF.
std::optional<ClarificationResponse> ask_form(const ClarificationForm& form) {
  ClarificationResponse r;
  r.formId = form.formId;
  std::cout << "\n== " << form.title << " ==\n";
  for (const auto& d : form.defaultsDisclosure) std::cout << "  note: " << d.explanation << "\n";
  for (const auto& f : form.fields) {
    std::cout << "\n" << std::string(static_cast<std::size_t>(f.headerLevel), '#') << " " << f.label
              << (f.required ? "" : " (optional)") << "\n";
    if (has_options(f.kind))
      for (std::size_t i = 0; i < f.options.size(); ++i) {
        std::cout << "  " << i + 1 << ". " << f.options[i].label;
        if (!f.options[i].detail.empty()) std::cout << " (" << f.options[i].detail << ")";
        std::cout << "\n";
      }
    while (true) {
      std::cout << "  answer";
      if (f.defaultValue) std::cout << " [" << *f.defaultValue << "]";
      if (f.kind == FieldKind::Date) std::cout << " (YYYY-MM-DD)";
      std::cout << ", ! to let the agent decide: ";
      std::string line;
      if (!read_line(line)) return std::nullopt;
      line = text::trim(line);
      if (line == "!") {
        r.escape = true;
        return r;
      }
      if (line.empty()) {
        if (f.defaultValue) r.answers.emplace_back(f.key, *f.defaultValue);
        if (f.defaultValue || !f.required) break;
        std::cout << "  this field is required\n";
        continue;
      }
      if (has_options(f.kind)) {
        std::size_t pick = 0;
        try {
          pick = std::stoul(line);
        } catch (const std::exception&) {
        }
        if (pick >= 1 && pick <= f.options.size()) {
          r.answers.emplace_back(f.key, f.options[pick - 1].value);
          break;
        }
        std::cout << "  enter a number from 1 to " << f.options.size() << "\n";
        continue;
      }
      r.answers.emplace_back(f.key, line);
      break;
    }
  }
  return r;
}

void print_event(const std::string& kind, const Json& p) {
  if (kind == "decision") {
    std::cout << "step " << p["step"] << ": " << p["kind"].get<std::string>();
    if (!p["actions"].empty()) std::cout << " " << render_action(action_from_json(p["actions"][0]));
    std::cout << "\n";
  } else if (kind == "action") {
    std::cout << "  did " << render_action(action_from_json(p["action"])) << " (" << p.value("note", std::string())
              << ")\n";
  } else if (kind == "error") {
    std::cout << "  error: " << p["message"].get<std::string>() << "\n";
  } else if (kind == "verdict") {
    std::cout << "outcome check: " << (p["succeeded"].get<bool>() ? "success" : "failure") << " - "
              << p["evidence"].get<std::string>() << "\n";
  }
}

// ---------------------------------------------------------------------------

int cmd_run(const Globals& g, const std::string& query, const std::string& fixture, const std::string& strategyName,
            const std::string& scriptPath, std::string task, int maxSteps, const std::string& tracePath,
            const std::string& screenReader, bool autoConfirm, bool interactive, bool verify) {
  const auto fixturePath = resolve_fixture(fixture, g.fixtureDir);
  auto fx = std::make_shared<const Fixture>(Fixture::load(fixturePath));
  ReplayEnvironment env(fx);
  std::shared_ptr<const MockScript> script;
  if (!scriptPath.empty()) script = load_script(scriptPath);
  if (task.empty()) task = fixturePath.stem().string();
  auto client = make_client(script, task, fixturePath.parent_path());

  std::unique_ptr<EventLog> log;
  if (!tracePath.empty()) {
    std::filesystem::remove(tracePath);
    log = std::make_unique<EventLog>("run-" + task, tracePath);
  }
  EventSink sink = [&](const std::string& kind, Json p) {
    print_event(kind, p);
    if (log) log->append(kind, std::move(p));
  };
  LoopOptions opts;
  opts.maxSteps = maxSteps;
  opts.autoConfirm = autoConfirm;
  AgentLoop loop(*client, env, strategy_from(strategyName), opts, sink);
  loop.start(query, screenReader.empty() ? std::nullopt : std::optional<std::string>(screenReader));

  while (true) {
    auto st = loop.run();
    if (log) log->sync();
    if (st == LoopStatus::PausedClarify) {
      std::cout << "paused for clarification at step " << *loop.paused_at() << "\n";
      if (!interactive) {
        std::cout << to_json(*loop.pending_form()).dump(2) << "\n";
        return 2;
      }
      auto answer = ask_form(*loop.pending_form());
      if (!answer) return 2;
      try {
        loop.resume(*answer);
      } catch (const ValidationError& e) {
        std::cout << e.what() << "\n";
      }
      continue;
    }
    if (st == LoopStatus::PausedConfirm) {
      std::cout << "confirm " << render_action(*loop.pending_action()) << "? [y/N] ";
      std::string line;
      if (!interactive || !read_line(line)) {
        std::cout << "\n";
        return 2;
      }
      loop.confirm(text::lower(text::trim(line)) == "y" || text::lower(text::trim(line)) == "yes");
      continue;
    }
    if (st == LoopStatus::Finished && verify) {
      auto shot = env.observe().screenshotRef;
      if (shot) {
        auto checker = make_client(script, task, fixturePath.parent_path(), true);
        auto v = verify_outcome(loop.context(), shot, *checker);
        sink("verdict", {{"succeeded", v.succeeded}, {"evidence", v.evidence}, {"model", v.modelId}});
      }
    }
    std::cout << "status: " << to_string(st) << "\n";
    return st == LoopStatus::Finished ? 0 : 1;
  }
}

int cmd_replay(const std::string& path) {
  auto r = replay_trace(path);
  auto list = [](const std::vector<DecisionKind>& v) {
    std::string s;
    for (auto k : v) s += (s.empty() ? "" : " ") + std::string(to_string(k));
    return s.empty() ? std::string("(none)") : s;
  };
  std::cout << "recorded: " << list(r.recorded) << "\n";
  std::cout << "replayed: " << list(r.replayed) << "\n";
  std::cout << (r.matches() ? "match" : "MISMATCH") << "\n";
  return r.matches() ? 0 : 1;
}

int cmd_eval(const Globals& g, const std::string& dataset, const std::string& strategy, int repeats,
             const std::string& out, const std::string& scriptPath, const std::string& traceDir, int maxSteps) {
  auto tasks = load_dataset(dataset, g.fixtureDir);
  std::shared_ptr<const MockScript> script;
  if (!scriptPath.empty()) script = load_script(scriptPath);
  const auto base = g.fixtureDir.empty() ? std::filesystem::path(dataset).parent_path() : std::filesystem::path(g.fixtureDir);
  ClientFactory clients = [&](const TaskRecord& t, int) { return make_client(script, t.taskId, base); };

  std::vector<std::string> names;
  if (strategy == "all") names = {"prompting", "verify-first", "verify-per-step", "verify-plan"};
  else names = {strategy};

  std::printf("%-16s %4s %4s %4s %4s %4s %7s %7s %7s %8s %8s %8s\n", "strategy", "TP", "FP", "FN", "TN", "Excl",
              "P", "R", "F1", "SR-pause", "SR-none", "SR-all");
  Json reports = Json::array();
  for (const auto& name : names) {
    BenchmarkOptions opts;
    opts.repeats = repeats;
    opts.loop.maxSteps = maxSteps;
    if (!traceDir.empty()) opts.traceDir = std::filesystem::path(traceDir) / (names.size() > 1 ? name : "");
    auto report = run_benchmark(tasks, strategy_from(name), clients, opts);
    const auto& c = report.confusion;
    std::printf("%-16s %4lld %4lld %4lld %4lld %4lld %7s %7s %7s %8s %8s %8s\n", name.c_str(), c.tp, c.fp, c.fn, c.tn,
                c.excluded, rate(report.precision).c_str(), rate(report.recall).c_str(), rate(report.f1).c_str(),
                rate(report.successRatePauseRequired).c_str(), rate(report.successRateNoPause).c_str(),
                rate(report.successRateOverall).c_str());
    for (const auto& run : report.runs)
      if (!run.error.empty()) std::fprintf(stderr, "  %s r%d: %s\n", run.taskId.c_str(), run.repeatIndex, run.error.c_str());
    reports.push_back(to_json(report));
  }
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw SetupError("cannot write " + out);
    f << (reports.size() == 1 ? reports[0] : Json{{"reports", reports}}).dump(2) << "\n";
  }
  return 0;
}

int cmd_serve(const Globals& g, const std::string& host, int port, const std::string& scriptPath,
              const std::string& traceDir, bool verify) {
  ServiceOptions o;
  o.traceDir = traceDir;
  o.fixtureDir = g.fixtureDir;
  if (g.clarifyTimeout > 0)
    o.clarifyTimeout = std::chrono::milliseconds(static_cast<long long>(g.clarifyTimeout * 1000));
  std::shared_ptr<const MockScript> script;
  if (!scriptPath.empty()) script = load_script(scriptPath);
  const std::filesystem::path base = g.fixtureDir;
  o.gateway = [script, base](const SessionRequest& r) { return make_client(script, r.task, base); };
  if (verify) o.verifier = [script, base](const SessionRequest& r) { return make_client(script, r.task, base, true); };

  // Signals go to a waiting thread instead of interrupting the server.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  SessionManager sessions(std::move(o));
  httplib::Server server;
  mount_api(server, sessions);
  if (!server.bind_to_port(host, port)) throw SetupError("cannot listen on " + host + ":" + std::to_string(port));
  std::thread stopper([&] {
    int sig = 0;
    sigwait(&set, &sig);
    sessions.shutdown();
    server.stop();
  });
  std::cout << "listening on http://" << host << ":" << port << std::endl;
  server.listen_after_bind();
  if (stopper.joinable()) {
    pthread_kill(stopper.native_handle(), SIGTERM);
    stopper.join();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop UI automation agent"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--fixture-dir", g.fixtureDir, "Base directory for relative fixture paths");
  app.add_option("--clarify-timeout", g.clarifyTimeout,
                 "Seconds a served session waits for a clarification before letting the agent decide (0 = forever)");

  auto* serve = app.add_subcommand("serve", "Run the local session service");
  std::string host = "127.0.0.1", serveScript, traceDir = "traces";
  int port = 8843;
  bool serveVerify = false;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--mock-script", serveScript, "Answer model calls from a scripted mock");
  serve->add_option("--trace-dir", traceDir, "Where session traces are written");
  serve->add_flag("--verify", serveVerify, "Check the final screenshot with the verification model");

  auto* run = app.add_subcommand("run", "Run one task in the terminal");
  std::string query, fixture, strategy = "verify-plan", runScript, task, tracePath, screenReader;
  int maxSteps = 20;
  bool autoConfirm = false, nonInteractive = false, runVerify = false;
  run->add_option("--query", query, "The command to carry out")->required();
  run->add_option("--fixture", fixture, "Replay fixture")->required();
  run->add_option("--strategy", strategy, "prompting | verify-first | verify-per-step | verify-plan");
  run->add_option("--mock-script", runScript);
  run->add_option("--task", task, "Task id for the scripted mock (default: fixture name)");
  run->add_option("--max-steps", maxSteps);
  run->add_option("--trace", tracePath, "Write a JSON-lines trace here");
  run->add_option("--screen-reader", screenReader);
  run->add_flag("--auto-confirm", autoConfirm, "Approve side-effecting actions without asking");
  run->add_flag("--non-interactive", nonInteractive, "Stop at the first pause instead of prompting");
  run->add_flag("--verify", runVerify, "Check the final screenshot with the verification model");

  auto* replay = app.add_subcommand("replay", "Re-run a trace and compare decisions");
  std::string replayPath;
  replay->add_option("trace", replayPath)->required();

  auto* eval = app.add_subcommand("eval", "Benchmark a strategy over a dataset");
  std::string dataset, evalStrategy = "verify-plan", out, evalScript, evalTraces;
  int repeats = 3, evalSteps = 20;
  eval->add_option("--dataset", dataset)->required();
  eval->add_option("--strategy", evalStrategy, "A strategy name, or all");
  eval->add_option("--repeats", repeats);
  eval->add_option("--out", out, "Write the report JSON here");
  eval->add_option("--mock-script", evalScript);
  eval->add_option("--trace-dir", evalTraces, "Write one trace per run here");
  eval->add_option("--max-steps", evalSteps);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(g, host, port, serveScript, traceDir, serveVerify);
    if (*run)
      return cmd_run(g, query, fixture, strategy, runScript, task, maxSteps, tracePath, screenReader, autoConfirm,
                     !nonInteractive, runVerify);
    if (*replay) return cmd_replay(replayPath);
    if (*eval) return cmd_eval(g, dataset, evalStrategy, repeats, out, evalScript, evalTraces, evalSteps);
  } catch (const std::exception& e) {
    std::cerr << "morae: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
