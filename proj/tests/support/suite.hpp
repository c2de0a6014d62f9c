#pragma once

// Loading and running the bundled synthetic suite from tests.

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "morae/eval.hpp"

namespace suite {

inline std::filesystem::path dir() { return std::filesystem::path(MORAE_DATA_DIR) / "synthetic"; }

inline std::vector<morae::TaskRecord> tasks() { return morae::load_dataset(dir() / "dataset.jsonl"); }

inline std::shared_ptr<const morae::MockScript> script() {
  static auto s = std::make_shared<const morae::MockScript>(morae::MockScript::load(dir() / "mock_script.json"));
  return s;
}

inline morae::ClientFactory mock_clients() {
  auto s = script();
  return [s](const morae::TaskRecord& t, int) { return std::make_shared<morae::ScriptedMock>(s, t.taskId); };
}

inline const morae::TaskRecord& task(const std::vector<morae::TaskRecord>& all, const std::string& id) {
  for (const auto& t : all)
    if (t.taskId == id) return t;
  throw std::runtime_error("no task " + id);
}

inline std::shared_ptr<const morae::Fixture> fixture(const morae::TaskRecord& t) {
  return std::make_shared<const morae::Fixture>(morae::Fixture::load(t.fixturePath));
}

// A scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(morae::now_ms()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Expected pause class per task under verify-plan, from tests/oracles/synthetic_oracle.py.
inline const std::map<std::string, morae::PauseClass>& verify_plan_classes() {
  using morae::PauseClass;
  static const std::map<std::string, PauseClass> m{
      {"p1-sparkling-water", PauseClass::TP}, {"p2-flight", PauseClass::TP},     {"p3-meeting", PauseClass::TP},
      {"p4-slide-background", PauseClass::TP}, {"p5-email-john", PauseClass::TP}, {"p6-reddit-post", PauseClass::TP},
      {"p7-latest-episode", PauseClass::TP},  {"p8-share-budget", PauseClass::FN}, {"n1-add-bananas", PauseClass::TN},
      {"n2-check-in", PauseClass::TN},        {"n3-delete-event", PauseClass::TN}, {"n4-bold-title", PauseClass::TN},
      {"n5-reply-anna", PauseClass::FP},      {"n6-like-post", PauseClass::TN},    {"n7-rent-movie", PauseClass::TN},
      {"n8-delete-notes", PauseClass::TN}};
  return m;
}

}  // namespace suite
