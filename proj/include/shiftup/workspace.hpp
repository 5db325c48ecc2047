#pragma once

// Project-level operations shared by the CLI and the HTTP service, so both
// surfaces drive exactly the same code paths.

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "adapters.hpp"
#include "bundle.hpp"
#include "loop_engine.hpp"
#include "metrics.hpp"
#include "trace_graph.hpp"

namespace shiftup {

inline constexpr const char* kLoopEventLog = "logs/loop-events.jsonl";
inline constexpr const char* kPromptLog = "logs/prompts.jsonl";

class BundleLoadError : public std::runtime_error {
 public:
  explicit BundleLoadError(LoadResult result)
      : std::runtime_error(result.io_failure ? "cannot open project" : "project has violations"),
        result_(std::move(result)) {}
  const LoadResult& result() const { return result_; }

 private:
  LoadResult result_;
};

// How the loop for one issue is driven. Unset fields fall back to shiftup.json.
struct LoopOptions {
  std::optional<AgentKind> agent;
  std::optional<std::uint64_t> seed;
  std::optional<double> targeted_success_p;
  std::optional<double> untargeted_success_p;
  std::optional<double> regression_rate;
  std::optional<int> max_iterations;
  std::optional<bool> require_plan_approval;
};

inline LoopOptions loop_options_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"agent", "seed", "targeted_success_p", "untargeted_success_p", "regression_rate",
                          "max_iterations", "require_plan_approval"},
                         "loop options");
  LoopOptions o;
  if (auto a = detail::optional_field<std::string>(j, "agent")) o.agent = kAgentKinds.parse_or_throw(*a, "agent");
  o.seed = detail::optional_field<std::uint64_t>(j, "seed");
  o.targeted_success_p = detail::optional_field<double>(j, "targeted_success_p");
  o.untargeted_success_p = detail::optional_field<double>(j, "untargeted_success_p");
  o.regression_rate = detail::optional_field<double>(j, "regression_rate");
  o.max_iterations = detail::optional_field<int>(j, "max_iterations");
  o.require_plan_approval = detail::optional_field<bool>(j, "require_plan_approval");
  return o;
}

// Thrown for environment problems (missing command configuration and the like).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Workspace {
 public:
  explicit Workspace(const fs::path& root) : root_(root) {
    auto result = load_bundle(root);
    if (!result.ok()) throw BundleLoadError(std::move(result));
    bundle_ = std::move(*result.bundle);
  }

  Workspace& with_clock(LoopEngine::Clock clock) {
    clock_ = std::move(clock);
    return *this;
  }

  const fs::path& root() const { return root_; }

  // Snapshot of the bundle; issue statuses change as loops close.
  ArtifactBundle bundle() const {
    std::lock_guard lock(bundle_mutex_);
    return bundle_;
  }

  Json summary() const {
    std::lock_guard lock(bundle_mutex_);
    std::size_t closed = std::count_if(bundle_.issues.begin(), bundle_.issues.end(),
                                       [](const WorkIssue& i) { return i.status == IssueStatus::closed; });
    return {{"name", bundle_.config.name},
            {"requirements", bundle_.requirements.size()},
            {"stories", bundle_.stories.size()},
            {"tests", bundle_.tests.size()},
            {"phases", bundle_.phases.size()},
            {"issues", bundle_.issues.size()},
            {"issues_closed", closed},
            {"adrs", bundle_.adrs.size()},
            {"c4_elements", bundle_.c4.elements.size()}};
  }

  Json issues() const {
    std::lock_guard lock(bundle_mutex_);
    Json out = Json::array();
    for (const auto& i : bundle_.issues) {
      out.push_back({{"id", i.id},
                     {"phase", i.phase_ref},
                     {"title", i.title},
                     {"status", kIssueStatuses.to_string(i.status)},
                     {"constraint_test_ids", i.constraint_test_ids},
                     {"blocked_by", blocking_phases(bundle_, i)}});
    }
    return out;
  }

  TraceGraph graph() const {
    std::lock_guard lock(bundle_mutex_);
    return build_graph(bundle_);
  }

  // --- loop -----------------------------------------------------------------

  LoopRun open(const std::string& issue_id, const LoopOptions& options = {}) {
    auto session = std::make_shared<Session>();
    std::lock_guard session_lock(session->mutex);
    {
      std::lock_guard lock(bundle_mutex_);
      auto* issue = bundle_.find_issue(issue_id);
      if (!issue) throw LoopError("unknown-issue", "unknown issue " + issue_id);
      auto config = bundle_.config;
      LoopConfig loop = config.loop;
      if (options.max_iterations) loop.max_iterations = *options.max_iterations;
      if (options.require_plan_approval) loop.require_plan_approval = *options.require_plan_approval;
      try {
        loop.check();
      } catch (const std::invalid_argument& e) {
        throw LoopError("bad-request", e.what());
      }
      make_adapters(*session, config, options, issue->constraint_test_ids);
      session->config = loop;
    }

    std::lock_guard sessions_lock(sessions_mutex_);
    if (auto it = sessions_.find(issue_id); it != sessions_.end()) {
      std::lock_guard other(it->second->mutex);
      if (!it->second->run.finished())
        throw LoopError("wrong-state", issue_id + " already has an active loop in state " +
                                           std::string(kLoopStates.to_string(it->second->run.state)));
    }
    auto first_seq = last_logged_seq(issue_id) + 1;
    with_engine(*session, [&](LoopEngine& engine) { session->run = engine.open_issue(issue_id, first_seq); });
    sessions_[issue_id] = session;
    return session->run;
  }

  LoopRun draft_plan(const std::string& issue) {
    return act(issue, [](LoopEngine& e, Session& s) { e.draft_plan(s.run, *s.agent); });
  }
  LoopRun reject_plan(const std::string& issue, const std::string& reason = {}) {
    return act(issue, [&](LoopEngine& e, Session& s) { e.reject_plan(s.run, reason); });
  }
  LoopRun approve_plan(const std::string& issue) {
    return act(issue, [](LoopEngine& e, Session& s) { e.approve_plan(s.run); });
  }
  LoopRun step(const std::string& issue) {
    return act(issue, [](LoopEngine& e, Session& s) { e.step(s.run, *s.agent, *s.runner); });
  }
  LoopRun run_to_completion(const std::string& issue) {
    return act(issue, [](LoopEngine& e, Session& s) { e.run_to_completion(s.run, *s.agent, *s.runner); });
  }

  std::optional<LoopRun> run_of(const std::string& issue) const {
    auto s = session(issue);
    if (!s) return std::nullopt;
    std::lock_guard lock(s->mutex);
    return s->run;
  }

  // Persisted events for `issue` with seq > after. Waits up to `wait` for new ones.
  std::vector<LoopEvent> events(const std::string& issue, std::uint64_t after,
                                std::chrono::milliseconds wait = std::chrono::milliseconds{0}) const {
    // Ids are never mutated after load, so this lookup needs no bundle lock.
    if (!bundle_.find_issue(issue)) throw LoopError("unknown-issue", "unknown issue " + issue);
    std::unique_lock lock(log_mutex_);
    auto collect = [&] {
      std::vector<LoopEvent> out;
      for (auto& e : read_event_log_locked())
        if (e.issue == issue && e.seq > after) out.push_back(std::move(e));
      return out;
    };
    auto out = collect();
    if (out.empty() && wait.count() > 0) {
      auto deadline = std::chrono::steady_clock::now() + wait;
      while (out.empty() && log_changed_.wait_until(lock, deadline) != std::cv_status::timeout) out = collect();
      if (out.empty()) out = collect();
    }
    return out;
  }

  std::vector<LoopEvent> all_events() const {
    std::lock_guard lock(log_mutex_);
    return read_event_log_locked();
  }

 private:
  struct Session {
    std::mutex mutex;
    LoopRun run;
    LoopConfig config;
    std::unique_ptr<Agent> agent;
    std::unique_ptr<TestRunner> runner;
  };

  static void make_adapters(Session& s, const ProjectConfig& config, const LoopOptions& o,
                            const std::vector<std::string>& constraint) {
    auto kind = o.agent.value_or(config.agent);
    if (kind == AgentKind::mock) {
      MockAgentParams p = config.mock;
      try {
        if (o.seed) p.seed = *o.seed;
        if (o.targeted_success_p) p.targeted_success_p = Probability(*o.targeted_success_p);
        if (o.untargeted_success_p) p.untargeted_success_p = Probability(*o.untargeted_success_p);
        if (o.regression_rate) p.regression_rate = Probability(*o.regression_rate);
        p.check();
      } catch (const std::invalid_argument& e) {
        throw LoopError("bad-request", e.what());
      }
      auto world = MockWorld::failing(constraint);
      s.agent = std::make_unique<MockAgent>(p, world);
      s.runner = std::make_unique<MockRunner>(world);
      return;
    }
    if (config.agent_command.empty()) throw ConfigError("agent.command is not configured in shiftup.json");
    if (config.runner_command.empty()) throw ConfigError("runner.command is not configured in shiftup.json");
    s.agent = std::make_unique<CommandAgent>(config.agent_command, std::chrono::seconds(config.agent_timeout_seconds));
    try {
      s.runner = std::make_unique<CommandRunner>(config.runner_command);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  std::shared_ptr<Session> session(const std::string& issue) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(issue);
    return it == sessions_.end() ? nullptr : it->second;
  }

  template <typename F>
  void with_engine(Session& s, F&& f) {
    std::lock_guard lock(bundle_mutex_);
    LoopEngine engine(bundle_, s.config);
    engine.persist_to(root_).on_event([this](const LoopEvent& e) { append_event(e); });
    if (clock_) engine.with_clock(clock_);
    f(engine);
  }

  // Commands for one issue are serialized by the session mutex.
  template <typename F>
  LoopRun act(const std::string& issue, F&& f) {
    auto s = session(issue);
    if (!s) {
      std::lock_guard lock(bundle_mutex_);
      if (!bundle_.find_issue(issue)) throw LoopError("unknown-issue", "unknown issue " + issue);
      throw LoopError("wrong-state", issue + " has no open loop");
    }
    std::lock_guard lock(s->mutex);
    with_engine(*s, [&](LoopEngine& engine) { f(engine, *s); });
    return s->run;
  }

  void append_event(const LoopEvent& e) {
    std::lock_guard lock(log_mutex_);
    auto path = root_ / kLoopEventLog;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path.string());
    out << to_json(e).dump() << '\n';
    log_changed_.notify_all();
  }

  std::vector<LoopEvent> read_event_log_locked() const {
    std::vector<LoopEvent> out;
    std::ifstream in(root_ / kLoopEventLog, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        out.push_back(event_from_json(Json::parse(line)));
      } catch (const std::exception&) {
        // A torn trailing line from an interrupted writer is skipped.
      }
    }
    return out;
  }

  std::uint64_t last_logged_seq(const std::string& issue) const {
    std::lock_guard lock(log_mutex_);
    std::uint64_t last = 0;
    for (const auto& e : read_event_log_locked())
      if (e.issue == issue) last = std::max(last, e.seq);
    return last;
  }

  fs::path root_;
  ArtifactBundle bundle_;
  LoopEngine::Clock clock_;
  mutable std::mutex bundle_mutex_;
  mutable std::mutex sessions_mutex_;
  mutable std::mutex log_mutex_;
  mutable std::condition_variable log_changed_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace shiftup
