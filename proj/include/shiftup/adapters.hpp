#pragma once

#include <stdlib.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "config.hpp"
#include "ids.hpp"
#include "process.hpp"
#include "rng.hpp"

namespace shiftup {

enum class TestStatus { pass, fail, error };
inline constexpr EnumNames<TestStatus, 3> kTestStatuses{
    {{{TestStatus::pass, "pass"}, {TestStatus::fail, "fail"}, {TestStatus::error, "error"}}}};

struct TestOutcome {
  std::string test_id;
  TestStatus status = TestStatus::fail;
  std::string message;
  std::uint64_t duration_ms = 0;
  bool operator==(const TestOutcome&) const = default;
};

inline Json to_json(const TestOutcome& o) {
  return {{"test_id", o.test_id},
          {"status", kTestStatuses.to_string(o.status)},
          {"message", o.message},
          {"duration_ms", o.duration_ms}};
}

inline TestOutcome outcome_from_json(const Json& j) {
  detail::reject_unknown(j, {"test_id", "status", "message", "duration_ms"}, "result");
  auto duration = detail::optional_field<std::int64_t>(j, "duration_ms").value_or(0);
  if (duration < 0) throw FormatError("duration_ms must be non-negative");
  return {detail::required<std::string>(j, "test_id"),
          kTestStatuses.parse_or_throw(detail::required<std::string>(j, "status"), "status"),
          detail::optional_field<std::string>(j, "message").value_or(""), static_cast<std::uint64_t>(duration)};
}

// Everything the agent may see when drafting a plan. Agents never read the bundle.
struct PlanContext {
  std::string issue_id;
  std::string title;
  std::string description;
  std::vector<AcceptanceTest> constraint_tests;
  C4Model c4;
  std::vector<ADRecord> adrs;
};

struct GenerateRequest {
  std::string issue_id;
  std::string plan;
  std::optional<std::vector<TestOutcome>> feedback;
};

// Free-form description of what the agent changed.
struct ChangeSet {
  std::string summary;
  std::vector<std::string> files;
  bool operator==(const ChangeSet&) const = default;
};

inline Json to_json(const ChangeSet& c) { return {{"summary", c.summary}, {"files", c.files}}; }

class AdapterError : public std::runtime_error {
 public:
  AdapterError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string draft_plan(const PlanContext& context) = 0;
  virtual ChangeSet generate(const GenerateRequest& request) = 0;
};

class TestRunner {
 public:
  virtual ~TestRunner() = default;
  // Exactly one outcome per requested id.
  virtual std::vector<TestOutcome> run(const std::vector<std::string>& test_ids) = 0;
};

// ---------------------------------------------------------------------------
// Mock agent

// Hidden ground truth: which tests the mock "implementation" currently satisfies.
using CorrectnessMap = std::map<std::string, bool, IdLess>;

struct MockGenerateResult {
  CorrectnessMap state;
  ChangeSet changes;
};

// One generate call. Tests are visited in natural id order and each consumes
// exactly one uniform draw u from stream(seed, call_index):
//   correct          -> regresses      if u < regression_rate
//   failing,targeted -> becomes correct if u < targeted_success_p
//   failing,other    -> becomes correct if u < untargeted_success_p
inline MockGenerateResult mock_generate(const CorrectnessMap& state, const MockAgentParams& params,
                                        std::uint64_t call_index, const std::set<std::string>& targeted) {
  auto rng = stream(params.seed, call_index);
  MockGenerateResult r{state, {}};
  std::vector<std::string> fixed, broken;
  for (auto& [id, correct] : r.state) {
    double u = rng.uniform();
    if (correct) {
      if (u < params.regression_rate.value()) {
        correct = false;
        broken.push_back(id);
      }
    } else {
      double p = targeted.count(id) ? params.targeted_success_p.value() : params.untargeted_success_p.value();
      if (u < p) {
        correct = true;
        fixed.push_back(id);
      }
    }
  }
  r.changes.summary = "call " + std::to_string(call_index) + ": fixed " + std::to_string(fixed.size()) +
                      ", regressed " + std::to_string(broken.size());
  for (const auto& id : fixed) r.changes.files.push_back("src/" + id + ".impl");
  for (const auto& id : broken) r.changes.files.push_back("src/" + id + ".impl");
  return r;
}

inline std::vector<TestOutcome> mock_run(const CorrectnessMap& state, const std::vector<std::string>& ids) {
  std::vector<TestOutcome> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = state.find(id);
    if (it == state.end()) throw AdapterError("unknown-id", "mock runner has no test " + id);
    out.push_back({id, it->second ? TestStatus::pass : TestStatus::fail, it->second ? "" : "mock failure", 0});
  }
  return out;
}

// State shared by a mock agent and its runner.
struct MockWorld {
  CorrectnessMap correct;

  static std::shared_ptr<MockWorld> failing(const std::vector<std::string>& test_ids) {
    auto w = std::make_shared<MockWorld>();
    for (const auto& id : test_ids) w->correct[id] = false;
    return w;
  }
};

// The plan format the mock drafts and reads back: one numbered subtask per constraint test.
inline std::string mock_plan_text(const PlanContext& ctx) {
  std::string plan = "# Implementation plan for " + ctx.issue_id + ": " + ctx.title + "\n\n";
  if (!ctx.description.empty()) plan += ctx.description + "\n\n";
  plan += "## Subtasks\n\n";
  int n = 1;
  for (const auto& t : ctx.constraint_tests) plan += std::to_string(n++) + ". " + t.id + ": " + t.name + "\n";
  return plan;
}

// Ids of lines shaped `<n>. TC-<m>: ...`.
inline std::set<std::string> plan_targets(std::string_view plan) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start < plan.size()) {
    auto end = plan.find('\n', start);
    if (end == std::string_view::npos) end = plan.size();
    auto line = plan.substr(start, end - start);
    start = end + 1;
    auto dot = line.find(". ");
    if (dot == 0 || dot == std::string_view::npos) continue;
    if (line.substr(0, dot).find_first_not_of("0123456789") != std::string_view::npos) continue;
    auto rest = line.substr(dot + 2);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) continue;
    auto id = rest.substr(0, colon);
    if (is_valid_id(id, ArtifactType::test)) out.insert(std::string(id));
  }
  return out;
}

// Seeded stand-in for a coding agent. With guidance on, the first generate call
// targets the tests named in the plan and later calls target the failing tests
// named in the feedback. With guidance off (prompt-only) nothing is targeted.
class MockAgent : public Agent {
 public:
  MockAgent(MockAgentParams params, std::shared_ptr<MockWorld> world, bool guidance = true)
      : params_(params), world_(std::move(world)), guidance_(guidance) {
    params_.check();
  }

  std::string draft_plan(const PlanContext& context) override { return mock_plan_text(context); }

  ChangeSet generate(const GenerateRequest& request) override {
    std::set<std::string> targeted;
    if (guidance_) {
      if (request.feedback) {
        for (const auto& o : *request.feedback)
          if (o.status != TestStatus::pass) targeted.insert(o.test_id);
      } else {
        targeted = plan_targets(request.plan);
      }
    }
    auto r = mock_generate(world_->correct, params_, calls_++, targeted);
    world_->correct = std::move(r.state);
    return r.changes;
  }

  std::uint64_t calls() const { return calls_; }

 private:
  MockAgentParams params_;
  std::shared_ptr<MockWorld> world_;
  bool guidance_;
  std::uint64_t calls_ = 0;
};

class MockRunner : public TestRunner {
 public:
  explicit MockRunner(std::shared_ptr<MockWorld> world) : world_(std::move(world)) {}
  std::vector<TestOutcome> run(const std::vector<std::string>& test_ids) override {
    return mock_run(world_->correct, test_ids);
  }

 private:
  std::shared_ptr<MockWorld> world_;
};

// ---------------------------------------------------------------------------
// External command bridges

namespace detail {

inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

class TempFile {
 public:
  TempFile() {
    auto pattern = (std::filesystem::temp_directory_path() / "shiftup-results-XXXXXX").string();
    int fd = ::mkstemp(pattern.data());
    if (fd < 0) throw AdapterError("spawn-failure", "cannot create result file");
    ::close(fd);
    std::filesystem::remove(pattern);
    path_ = pattern;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace detail

// Parses a runner result file and enforces one outcome per requested id.
inline std::vector<TestOutcome> parse_runner_results(std::string_view text, const std::vector<std::string>& requested) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw AdapterError("malformed-result", "result file is not valid JSON at byte " + std::to_string(e.byte) + ": " +
                                               e.what());
  }
  std::vector<TestOutcome> outcomes;
  try {
    detail::reject_unknown(j, {"results"}, "result file");
    auto results = detail::required<Json>(j, "results");
    if (!results.is_array()) throw FormatError("'results' must be an array");
    for (const auto& r : results) outcomes.push_back(outcome_from_json(r));
  } catch (const FormatError& e) {
    throw AdapterError("malformed-result", std::string("result file: ") + e.what());
  }

  std::set<std::string> wanted(requested.begin(), requested.end());
  std::map<std::string, TestOutcome> by_id;
  for (auto& o : outcomes) {
    if (!wanted.count(o.test_id)) throw AdapterError("extra-id", "runner reported unrequested test " + o.test_id);
    if (!by_id.emplace(o.test_id, o).second)
      throw AdapterError("duplicate-id", "runner reported " + o.test_id + " more than once");
  }
  std::string missing;
  for (const auto& id : requested)
    if (!by_id.count(id)) missing += (missing.empty() ? "" : ", ") + id;
  if (!missing.empty()) throw AdapterError("missing-id", "runner reported no result for " + missing);

  std::vector<TestOutcome> ordered;
  for (const auto& id : requested) ordered.push_back(by_id.at(id));
  return ordered;
}

// Runs a command template with `{ids}` (space separated test ids) and `{out}`
// (result file path) placeholders, then reads the result file.
class CommandRunner : public TestRunner {
 public:
  explicit CommandRunner(std::string command_template, std::chrono::seconds timeout = std::chrono::seconds{0})
      : template_(std::move(command_template)), timeout_(timeout) {
    if (template_.find("{ids}") == std::string::npos || template_.find("{out}") == std::string::npos)
      throw std::invalid_argument("runner command template needs {ids} and {out} placeholders");
  }

  std::vector<TestOutcome> run(const std::vector<std::string>& test_ids) override {
    detail::TempFile out;
    std::string ids;
    for (const auto& id : test_ids) ids += (ids.empty() ? "" : " ") + detail::shell_quote(id);
    auto command = detail::replace_all(detail::replace_all(template_, "{ids}", ids), "{out}", detail::shell_quote(out.path()));
    ProcessResult proc;
    try {
      proc = run_shell(command, "", timeout_);
    } catch (const SpawnError& e) {
      throw AdapterError("spawn-failure", e.what());
    }
    if (proc.timed_out)
      throw AdapterError("timeout", "runner timed out after " + std::to_string(proc.elapsed.count()) + " ms");
    auto text = [&]() -> std::optional<std::string> {
      std::ifstream in(out.path(), std::ios::binary);
      if (!in) return std::nullopt;
      return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    if (!text) {
      if (proc.exit_code != 0)
        throw AdapterError("nonzero-exit-without-result-file",
                           "runner exited with " + std::to_string(proc.exit_code) + " and wrote no result file: " +
                               proc.err);
      throw AdapterError("malformed-result", "runner wrote no result file");
    }
    return parse_runner_results(*text, test_ids);
  }

 private:
  std::string template_;
  std::chrono::seconds timeout_;
};

inline Json to_json(const AcceptanceTest& t) {
  Json clauses = Json::array();
  for (const auto& c : t.clauses) clauses.push_back({{"kind", kClauseKinds.to_string(c.kind)}, {"text", c.text}});
  return {{"id", t.id}, {"story", t.story_ref}, {"name", t.name}, {"clauses", clauses}};
}

inline Json to_json(const ADRecord& a) {
  Json j{{"id", a.id},           {"title", a.title},       {"status", kAdrStatuses.to_string(a.status)},
         {"date", a.date},       {"context", a.context},   {"decision", a.decision},
         {"consequences", a.consequences}};
  if (a.supersedes) j["supersedes"] = *a.supersedes;
  return j;
}

// Bridges to an external agent process: one JSON request on stdin, one JSON
// reply on stdout per invocation. No retries.
class CommandAgent : public Agent {
 public:
  CommandAgent(std::string command, std::chrono::seconds timeout) : command_(std::move(command)), timeout_(timeout) {}

  std::string draft_plan(const PlanContext& ctx) override {
    Json tests = Json::array();
    for (const auto& t : ctx.constraint_tests) tests.push_back(to_json(t));
    Json adrs = Json::array();
    for (const auto& a : ctx.adrs) adrs.push_back(to_json(a));
    Json request{{"kind", "plan"},
                 {"issue", ctx.issue_id},
                 {"context",
                  {{"title", ctx.title}, {"description", ctx.description}, {"tests", tests}, {"c4", to_json(ctx.c4)},
                   {"adrs", adrs}}}};
    auto reply = call(request);
    auto plan = reply.find("plan");
    if (plan == reply.end() || !plan->is_string()) throw AdapterError("schema", "agent reply has no string 'plan'");
    return plan->get<std::string>();
  }

  ChangeSet generate(const GenerateRequest& req) override {
    Json request{{"kind", "generate"}, {"issue", req.issue_id}, {"plan", req.plan}};
    if (req.feedback) {
      Json fb = Json::array();
      for (const auto& o : *req.feedback) fb.push_back(to_json(o));
      request["feedback"] = fb;
    }
    auto reply = call(request);
    auto changes = reply.find("changes");
    if (changes == reply.end()) throw AdapterError("schema", "agent reply has no 'changes'");
    if (changes->is_string()) return {changes->get<std::string>(), {}};
    if (changes->is_object() && changes->contains("summary") && (*changes)["summary"].is_string()) {
      ChangeSet c{(*changes)["summary"].get<std::string>(), {}};
      if (auto f = changes->find("files"); f != changes->end()) {
        if (!f->is_array()) throw AdapterError("schema", "'changes.files' must be an array");
        for (const auto& x : *f) {
          if (!x.is_string()) throw AdapterError("schema", "'changes.files' must hold strings");
          c.files.push_back(x.get<std::string>());
        }
      }
      return c;
    }
    throw AdapterError("schema", "'changes' must be a string or {summary, files}");
  }

 private:
  Json call(const Json& request) {
    ProcessResult proc;
    try {
      proc = run_shell(command_, request.dump() + "\n", timeout_);
    } catch (const SpawnError& e) {
      throw AdapterError("spawn-failure", e.what());
    }
    if (proc.timed_out)
      throw AdapterError("timeout", "agent timed out after " + std::to_string(proc.elapsed.count()) + " ms");
    if (proc.exit_code == 127) throw AdapterError("spawn-failure", "agent command not found: " + proc.err);
    if (proc.exit_code != 0)
      throw AdapterError("agent-exit", "agent exited with " + std::to_string(proc.exit_code) + ": " + proc.err);
    try {
      auto j = Json::parse(proc.out);
      if (!j.is_object()) throw AdapterError("schema", "agent reply must be a JSON object");
      return j;
    } catch (const Json::parse_error& e) {
      throw AdapterError("malformed-reply", std::string("agent reply is not JSON: ") + e.what());
    }
  }

  std::string command_;
  std::chrono::seconds timeout_;
};

}  // namespace shiftup
