#pragma once

// The implement/verify loop over one work issue as an explicit state machine:
//
//   issue_opened -> plan_drafted -> plan_approved -> code_generated -> tests_run
//   tests_run -> issue_closed                 (every constraint test passes)
//   tests_run -> code_generated               (failures fed back to the agent)
//   tests_run -> stalled                      (failures at max_iterations)
//
// Every transition appends an event; the event list alone reconstructs the run.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adapters.hpp"
#include "bundle.hpp"
#include "config.hpp"

namespace shiftup {

enum class LoopState { issue_opened, plan_drafted, plan_approved, code_generated, tests_run, issue_closed, stalled };
inline constexpr EnumNames<LoopState, 7> kLoopStates{{{{LoopState::issue_opened, "issue_opened"},
                                                       {LoopState::plan_drafted, "plan_drafted"},
                                                       {LoopState::plan_approved, "plan_approved"},
                                                       {LoopState::code_generated, "code_generated"},
                                                       {LoopState::tests_run, "tests_run"},
                                                       {LoopState::issue_closed, "issue_closed"},
                                                       {LoopState::stalled, "stalled"}}}};

struct LoopEvent {
  std::uint64_t seq = 0;
  std::string ts;
  std::string issue;
  std::string kind;
  Json payload = Json::object();
  bool operator==(const LoopEvent&) const = default;
};

inline Json to_json(const LoopEvent& e) {
  return {{"seq", e.seq}, {"ts", e.ts}, {"issue", e.issue}, {"kind", e.kind}, {"payload", e.payload}};
}

inline LoopEvent event_from_json(const Json& j) {
  detail::reject_unknown(j, {"seq", "ts", "issue", "kind", "payload"}, "event");
  return {detail::required<std::uint64_t>(j, "seq"), detail::required<std::string>(j, "ts"),
          detail::required<std::string>(j, "issue"), detail::required<std::string>(j, "kind"),
          detail::required<Json>(j, "payload")};
}

struct LoopRun {
  std::string issue_ref;
  std::vector<std::string> constraint;
  LoopConfig config;
  LoopState state = LoopState::issue_opened;
  int iteration = 0;
  std::set<std::string, IdLess> passing;
  std::string plan;
  std::vector<TestOutcome> last_outcomes;
  std::vector<LoopEvent> events;

  bool all_passing() const { return passing.size() == constraint.size(); }
  std::vector<TestOutcome> failing_outcomes() const {
    std::vector<TestOutcome> out;
    for (const auto& o : last_outcomes)
      if (o.status != TestStatus::pass) out.push_back(o);
    return out;
  }
  std::uint64_t last_seq() const { return events.empty() ? 0 : events.back().seq; }
  bool finished() const { return state == LoopState::issue_closed || state == LoopState::stalled; }
  bool operator==(const LoopRun&) const = default;
};

inline Json to_json(const LoopRun& r) {
  Json outcomes = Json::array();
  for (const auto& o : r.last_outcomes) outcomes.push_back(to_json(o));
  return {{"issue", r.issue_ref},
          {"state", kLoopStates.to_string(r.state)},
          {"iteration", r.iteration},
          {"max_iterations", r.config.max_iterations},
          {"constraint_test_ids", r.constraint},
          {"passing", std::vector<std::string>(r.passing.begin(), r.passing.end())},
          {"plan", r.plan},
          {"last_outcomes", outcomes},
          {"last_seq", r.last_seq()}};
}

class LoopError : public std::runtime_error {
 public:
  LoopError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// UTC timestamp with millisecond precision.
inline std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

inline std::string plan_path(const std::string& issue, int iteration) {
  return "plans/" + issue + "-iter" + std::to_string(iteration) + ".md";
}

namespace detail {

inline Json outcomes_json(const std::vector<TestOutcome>& v) {
  Json a = Json::array();
  for (const auto& o : v) a.push_back(to_json(o));
  return a;
}

inline std::vector<TestOutcome> outcomes_from(const Json& a) {
  std::vector<TestOutcome> v;
  for (const auto& o : a) v.push_back(outcome_from_json(o));
  return v;
}

}  // namespace detail

// Rebuilds a run from its event list alone.
inline LoopRun replay(const std::vector<LoopEvent>& events) {
  LoopRun r;
  for (const auto& e : events) {
    const auto& p = e.payload;
    if (e.kind == "opened") {
      r.issue_ref = e.issue;
      r.constraint = p.at("constraint_test_ids").get<std::vector<std::string>>();
      r.config.max_iterations = p.at("max_iterations").get<int>();
      r.config.require_plan_approval = p.at("require_plan_approval").get<bool>();
      r.state = LoopState::issue_opened;
    } else if (e.kind == "plan_drafted") {
      r.plan = p.at("plan").get<std::string>();
      r.state = LoopState::plan_drafted;
    } else if (e.kind == "plan_rejected") {
      r.plan.clear();
      r.state = LoopState::issue_opened;
    } else if (e.kind == "plan_approved") {
      r.state = LoopState::plan_approved;
    } else if (e.kind == "generated") {
      r.iteration = p.at("iteration").get<int>();
      r.state = LoopState::code_generated;
    } else if (e.kind == "tests_run") {
      r.last_outcomes = detail::outcomes_from(p.at("outcomes"));
      auto passing = p.at("passing").get<std::vector<std::string>>();
      r.passing = {passing.begin(), passing.end()};
      r.state = LoopState::tests_run;
    } else if (e.kind == "closed") {
      r.state = LoopState::issue_closed;
    } else if (e.kind == "stalled") {
      r.state = LoopState::stalled;
    }
    // agent_failure and runner_error leave the state untouched.
    r.events.push_back(e);
  }
  return r;
}

// Phases the issue's phase depends on that still have unclosed issues.
inline std::vector<std::string> blocking_phases(const ArtifactBundle& bundle, const WorkIssue& issue) {
  std::vector<std::string> out;
  const auto* phase = bundle.find_phase(issue.phase_ref);
  if (!phase) return out;
  for (const auto& dep : phase->depends_on) {
    bool open = std::any_of(bundle.issues.begin(), bundle.issues.end(), [&](const WorkIssue& i) {
      return i.phase_ref == dep && i.status != IssueStatus::closed;
    });
    if (open) out.push_back(dep);
  }
  return out;
}

// Drives LoopRuns for the issues of one bundle. The only bundle mutation is the
// issue status (in_progress on open, closed on close).
class LoopEngine {
 public:
  using Clock = std::function<std::string()>;
  using EventSink = std::function<void(const LoopEvent&)>;

  LoopEngine(ArtifactBundle& bundle, LoopConfig config = {}) : bundle_(bundle), config_(config) { config_.check(); }

  // Directory that receives plan files and issue status updates.
  LoopEngine& persist_to(std::filesystem::path root) {
    root_ = std::move(root);
    return *this;
  }
  LoopEngine& on_event(EventSink sink) {
    sink_ = std::move(sink);
    return *this;
  }
  LoopEngine& with_clock(Clock clock) {
    clock_ = std::move(clock);
    return *this;
  }

  const LoopConfig& config() const { return config_; }

  LoopRun open_issue(std::string_view issue_id, std::uint64_t first_seq = 1) {
    auto* issue = bundle_.find_issue(issue_id);
    if (!issue) throw LoopError("unknown-issue", "unknown issue " + std::string(issue_id));
    if (issue->status == IssueStatus::closed) throw LoopError("issue-closed", issue->id + " is already closed");
    if (issue->constraint_test_ids.empty())
      throw LoopError("no-constraints", issue->id + " has no constraint tests");
    if (auto blocking = blocking_phases(bundle_, *issue); !blocking.empty()) {
      std::string list;
      for (const auto& p : blocking) list += (list.empty() ? "" : ", ") + p;
      throw LoopError("dependency-not-satisfied", issue->id + " is blocked by unfinished phases: " + list);
    }

    LoopRun run;
    run.issue_ref = issue->id;
    run.constraint = issue->constraint_test_ids;
    std::sort(run.constraint.begin(), run.constraint.end(), IdLess{});
    run.constraint.erase(std::unique(run.constraint.begin(), run.constraint.end()), run.constraint.end());
    run.config = config_;
    run.state = LoopState::issue_opened;
    append(run, "opened",
           {{"constraint_test_ids", run.constraint},
            {"max_iterations", config_.max_iterations},
            {"require_plan_approval", config_.require_plan_approval},
            {"phase", issue->phase_ref}},
           first_seq);
    set_status(*issue, IssueStatus::in_progress);
    return run;
  }

  void draft_plan(LoopRun& run, Agent& agent) {
    expect(run, {LoopState::issue_opened}, "draft a plan");
    const auto& issue = issue_of(run);
    PlanContext ctx{issue.id, issue.title, issue.description, {}, bundle_.c4, bundle_.adrs};
    for (const auto& id : run.constraint)
      if (const auto* t = bundle_.find_test(id)) ctx.constraint_tests.push_back(*t);

    std::string plan;
    try {
      plan = agent.draft_plan(ctx);
    } catch (const std::exception& e) {
      append(run, "agent_failure", {{"operation", "draft_plan"}, {"error", e.what()}});
      throw LoopError("agent-failure", std::string("agent failed to draft a plan: ") + e.what());
    }
    if (gwt::detail::trim(plan).empty()) {
      append(run, "agent_failure", {{"operation", "draft_plan"}, {"error", "empty-plan"}});
      throw LoopError("empty-plan", "agent returned an empty plan");
    }

    auto path = plan_path(run.issue_ref, run.iteration);
    if (root_) detail::write_file(*root_ / path, plan);
    run.plan = plan;
    run.state = LoopState::plan_drafted;
    append(run, "plan_drafted", {{"plan", plan}, {"path", path}});
    if (!run.config.require_plan_approval) {
      run.state = LoopState::plan_approved;
      append(run, "plan_approved", {{"actor", "config"}});
    }
  }

  // Sends the plan back for another draft.
  void reject_plan(LoopRun& run, const std::string& reason = {}) {
    expect(run, {LoopState::plan_drafted}, "reject the plan");
    run.plan.clear();
    run.state = LoopState::issue_opened;
    append(run, "plan_rejected", {{"actor", "human"}, {"reason", reason}});
  }

  void approve_plan(LoopRun& run) {
    expect(run, {LoopState::plan_drafted}, "approve the plan");
    run.state = LoopState::plan_approved;
    append(run, "plan_approved", {{"actor", "human"}});
  }

  void generate(LoopRun& run, Agent& agent, std::optional<std::vector<TestOutcome>> feedback = std::nullopt) {
    bool retry = run.state == LoopState::tests_run && !run.all_passing();
    if (run.state != LoopState::plan_approved && !retry)
      throw wrong_state(run, "generate code");
    if (run.iteration >= run.config.max_iterations) {
      run.state = LoopState::stalled;
      std::vector<std::string> failing;
      for (const auto& o : run.failing_outcomes()) failing.push_back(o.test_id);
      append(run, "stalled", {{"iteration", run.iteration}, {"failing", failing}});
      return;
    }
    ChangeSet changes;
    try {
      changes = agent.generate({run.issue_ref, run.plan, feedback});
    } catch (const std::exception& e) {
      append(run, "agent_failure", {{"operation", "generate"}, {"error", e.what()}});
      throw LoopError("agent-failure", std::string("agent failed to generate: ") + e.what());
    }
    run.iteration += 1;
    run.state = LoopState::code_generated;
    append(run, "generated",
           {{"iteration", run.iteration},
            {"changes", to_json(changes)},
            {"feedback", feedback ? detail::outcomes_json(*feedback) : Json()}});
  }

  void run_tests(LoopRun& run, TestRunner& runner) {
    expect(run, {LoopState::code_generated}, "run tests");
    std::vector<TestOutcome> outcomes;
    try {
      outcomes = runner.run(run.constraint);
    } catch (const std::exception& e) {
      std::string code = "runner-error";
      if (const auto* ae = dynamic_cast<const AdapterError*>(&e)) code = ae->code();
      append(run, "runner_error", {{"code", code}, {"error", e.what()}});
      throw LoopError("runner-error", std::string("test runner failed: ") + e.what());
    }

    std::set<std::string> wanted(run.constraint.begin(), run.constraint.end());
    std::set<std::string> seen;
    for (const auto& o : outcomes) {
      if (!wanted.count(o.test_id)) {
        append(run, "runner_error", {{"code", "foreign-test-id"}, {"error", o.test_id}});
        throw LoopError("foreign-test-id", "runner reported " + o.test_id + ", which is not a constraint of " +
                                               run.issue_ref);
      }
      seen.insert(o.test_id);
    }
    if (seen.size() != wanted.size() || outcomes.size() != wanted.size()) {
      append(run, "runner_error", {{"code", "missing-test-id"}, {"error", "incomplete outcome list"}});
      throw LoopError("missing-test-id", "runner did not report exactly one outcome per constraint test");
    }

    run.last_outcomes = outcomes;
    run.passing.clear();
    for (const auto& o : outcomes)
      if (o.status == TestStatus::pass) run.passing.insert(o.test_id);
    run.state = LoopState::tests_run;
    append(run, "tests_run",
           {{"outcomes", detail::outcomes_json(outcomes)},
            {"passing", std::vector<std::string>(run.passing.begin(), run.passing.end())}});
  }

  // Advances exactly one transition.
  void step(LoopRun& run, Agent& agent, TestRunner& runner) {
    switch (run.state) {
      case LoopState::issue_opened: return draft_plan(run, agent);
      case LoopState::plan_drafted: return approve_plan(run);
      case LoopState::plan_approved: return generate(run, agent);
      case LoopState::code_generated: return run_tests(run, runner);
      case LoopState::tests_run:
        if (run.all_passing()) return close(run);
        return generate(run, agent, run.failing_outcomes());
      case LoopState::issue_closed:
      case LoopState::stalled: break;
    }
    throw wrong_state(run, "step");
  }

  void run_to_completion(LoopRun& run, Agent& agent, TestRunner& runner) {
    if (run.finished()) throw wrong_state(run, "run to completion");
    while (!run.finished()) step(run, agent, runner);
  }

 private:
  void close(LoopRun& run) {
    run.state = LoopState::issue_closed;
    append(run, "closed", {{"passing", std::vector<std::string>(run.passing.begin(), run.passing.end())},
                           {"iteration", run.iteration}});
    if (auto* issue = bundle_.find_issue(run.issue_ref)) set_status(*issue, IssueStatus::closed);
  }

  void set_status(WorkIssue& issue, IssueStatus status) {
    issue.status = status;
    if (root_) save_issue(issue, *root_);
  }

  const WorkIssue& issue_of(const LoopRun& run) const {
    const auto* issue = bundle_.find_issue(run.issue_ref);
    if (!issue) throw LoopError("unknown-issue", "unknown issue " + run.issue_ref);
    return *issue;
  }

  static LoopError wrong_state(const LoopRun& run, std::string_view action) {
    return LoopError("wrong-state", "cannot " + std::string(action) + " in state " +
                                        std::string(kLoopStates.to_string(run.state)));
  }

  static void expect(const LoopRun& run, std::initializer_list<LoopState> allowed, std::string_view action) {
    if (std::find(allowed.begin(), allowed.end(), run.state) == allowed.end()) throw wrong_state(run, action);
  }

  void append(LoopRun& run, std::string kind, Json payload, std::optional<std::uint64_t> seq = std::nullopt) {
    LoopEvent e{seq ? *seq : run.last_seq() + 1, clock_(), run.issue_ref, std::move(kind), std::move(payload)};
    run.events.push_back(e);
    if (sink_) sink_(run.events.back());
  }

  ArtifactBundle& bundle_;
  LoopConfig config_;
  std::optional<std::filesystem::path> root_;
  EventSink sink_;
  Clock clock_ = utc_now;
};

}  // namespace shiftup
