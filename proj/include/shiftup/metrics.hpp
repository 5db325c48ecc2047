#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "artifacts.hpp"
#include "config.hpp"
#include "loop_engine.hpp"
#include "rng.hpp"

namespace shiftup {

enum class Paradigm { shift_up, structured_vibe };
inline constexpr EnumNames<Paradigm, 2> kParadigms{
    {{{Paradigm::shift_up, "shift_up"}, {Paradigm::structured_vibe, "structured_vibe"}}}};

enum class PromptCategory {
  proceed_next_step,
  execute_acceptance_tests,
  developer_identified_fix,
  accept_agent_solution,
  initiate_next_plan_step,
  manual_issue_fix,
  feature_planning,
  new_feature_implementation,
  other,
};
inline constexpr EnumNames<PromptCategory, 9> kPromptCategories{{{
    {PromptCategory::proceed_next_step, "proceed_next_step"},
    {PromptCategory::execute_acceptance_tests, "execute_acceptance_tests"},
    {PromptCategory::developer_identified_fix, "developer_identified_fix"},
    {PromptCategory::accept_agent_solution, "accept_agent_solution"},
    {PromptCategory::initiate_next_plan_step, "initiate_next_plan_step"},
    {PromptCategory::manual_issue_fix, "manual_issue_fix"},
    {PromptCategory::feature_planning, "feature_planning"},
    {PromptCategory::new_feature_implementation, "new_feature_implementation"},
    {PromptCategory::other, "other"},
}}};

// Closed category sets, in published order.
inline std::vector<PromptCategory> categories_of(Paradigm p) {
  using C = PromptCategory;
  if (p == Paradigm::shift_up)
    return {C::proceed_next_step, C::execute_acceptance_tests, C::developer_identified_fix, C::accept_agent_solution,
            C::initiate_next_plan_step};
  return {C::manual_issue_fix, C::proceed_next_step, C::feature_planning, C::new_feature_implementation, C::other};
}

inline bool belongs_to(PromptCategory c, Paradigm p) {
  auto set = categories_of(p);
  return std::find(set.begin(), set.end(), c) != set.end();
}

struct PromptRecord {
  std::string ts;
  Paradigm paradigm = Paradigm::shift_up;
  std::string text;
  std::optional<std::string> issue_ref;
  std::optional<PromptCategory> label;
  bool operator==(const PromptRecord&) const = default;
};

inline void check(const PromptRecord& r) {
  if (r.text.empty()) throw FormatError("prompt text is empty");
  if (r.label && !belongs_to(*r.label, r.paradigm))
    throw FormatError("category " + std::string(kPromptCategories.to_string(*r.label)) + " is not a " +
                      std::string(kParadigms.to_string(r.paradigm)) + " category");
}

inline Json to_json(const PromptRecord& r) {
  Json j{{"ts", r.ts}, {"paradigm", kParadigms.to_string(r.paradigm)}, {"text", r.text}};
  if (r.issue_ref) j["issue"] = *r.issue_ref;
  if (r.label) j["label"] = kPromptCategories.to_string(*r.label);
  return j;
}

inline PromptRecord prompt_from_json(const Json& j) {
  detail::reject_unknown(j, {"ts", "paradigm", "text", "issue", "label"}, "prompt record");
  PromptRecord r;
  r.ts = detail::optional_field<std::string>(j, "ts").value_or("");
  r.paradigm = kParadigms.parse_or_throw(detail::required<std::string>(j, "paradigm"), "paradigm");
  r.text = detail::required<std::string>(j, "text");
  r.issue_ref = detail::optional_field<std::string>(j, "issue");
  if (auto l = detail::optional_field<std::string>(j, "label"))
    r.label = kPromptCategories.parse_or_throw(*l, "category");
  check(r);
  return r;
}

// Appends one JSON line; earlier lines are never rewritten.
inline void record_prompt(const std::filesystem::path& log, const PromptRecord& r) {
  check(r);
  std::error_code ec;
  if (log.has_parent_path()) std::filesystem::create_directories(log.parent_path(), ec);
  std::ofstream out(log, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + log.string() + " for appending");
  out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + log.string());
}

class LogFormatError : public FormatError {
 public:
  LogFormatError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::vector<PromptRecord> load_prompt_log(const std::filesystem::path& log) {
  std::ifstream in(log, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + log.string());
  std::vector<PromptRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(prompt_from_json(Json::parse(line)));
    } catch (const Json::parse_error& e) {
      throw LogFormatError(n, e.what());
    } catch (const FormatError& e) {
      throw LogFormatError(n, e.what());
    }
  }
  return out;
}

struct CategoryRule {
  Paradigm paradigm;
  std::string pattern;  // ECMAScript regex, matched case-insensitively anywhere in the text
  PromptCategory category;
};

// First match wins, so specific phrasings come before generic ones.
inline std::vector<CategoryRule> default_rules() {
  using C = PromptCategory;
  constexpr auto S = Paradigm::shift_up;
  constexpr auto V = Paradigm::structured_vibe;
  return {
      {S, R"(acceptance tests?|robot tests?|run (the )?tests)", C::execute_acceptance_tests},
      {S, R"(next (phase|issue)|start (phase|issue)|open (the )?next|next step (of|in) the (overall )?plan)",
       C::initiate_next_plan_step},
      {S, R"(\b(fix|bug|broken|wrong|error|fails?)\b)", C::developer_identified_fix},
      {S, R"(\b(accept|approved?|looks good|go with|use your)\b)", C::accept_agent_solution},
      {S, R"(\b(proceed|continue|go ahead|carry on)\b|next step)", C::proceed_next_step},
      {V, R"(\b(fix|bug|broken|error|doesn'?t work|not working|crash(es)?)\b)", C::manual_issue_fix},
      {V, R"(\bplan\b|planning|design the)", C::feature_planning},
      {V, R"(\b(implement|add (a|an|the)?|create|build)\b)", C::new_feature_implementation},
      {V, R"(\b(proceed|continue|go ahead|carry on)\b|next step)", C::proceed_next_step},
  };
}

struct Categorization {
  std::optional<PromptCategory> category;  // nullopt: uncategorized
  bool from_label = false;
};

class Categorizer {
 public:
  explicit Categorizer(std::vector<CategoryRule> rules = default_rules()) {
    for (auto& r : rules) compiled_.push_back({r, std::regex(r.pattern, std::regex::ECMAScript | std::regex::icase)});
  }

  // Explicit labels win. Unmatched structured prompts fall back to `other`;
  // unmatched shift_up prompts stay uncategorized.
  Categorization categorize(const PromptRecord& r) const {
    if (r.label) return {r.label, true};
    for (const auto& [rule, re] : compiled_) {
      if (rule.paradigm == r.paradigm && std::regex_search(r.text, re)) return {rule.category, false};
    }
    if (r.paradigm == Paradigm::structured_vibe) return {PromptCategory::other, false};
    return {std::nullopt, false};
  }

 private:
  std::vector<std::pair<CategoryRule, std::regex>> compiled_;
};

inline Categorization categorize(const PromptRecord& r, const std::vector<CategoryRule>& rules = default_rules()) {
  return Categorizer(rules).categorize(r);
}

// round(100 * count / total), ties to even, in exact integer arithmetic.
inline std::uint64_t rounded_percent(std::uint64_t count, std::uint64_t total) {
  if (total == 0) return 0;
  std::uint64_t num = 100 * count;
  std::uint64_t q = num / total, r = num % total;
  if (2 * r > total || (2 * r == total && (q % 2 == 1))) ++q;
  return q;
}

struct DistributionRow {
  PromptCategory category;
  std::uint64_t count = 0;
  std::uint64_t percent = 0;
  bool operator==(const DistributionRow&) const = default;
};

struct DistributionReport {
  Paradigm paradigm;
  std::uint64_t total = 0;
  std::vector<DistributionRow> rows;
};

class UncategorizedPrompts : public std::runtime_error {
 public:
  explicit UncategorizedPrompts(std::vector<PromptRecord> records)
      : std::runtime_error(std::to_string(records.size()) + " uncategorized prompt(s)"), records_(std::move(records)) {}
  const std::vector<PromptRecord>& records() const { return records_; }

 private:
  std::vector<PromptRecord> records_;
};

inline DistributionReport distribution_report(const std::vector<PromptRecord>& log, Paradigm paradigm,
                                              const Categorizer& categorizer = Categorizer()) {
  DistributionReport report{paradigm, 0, {}};
  std::map<PromptCategory, std::uint64_t> counts;
  std::vector<PromptRecord> uncategorized;
  for (const auto& r : log) {
    if (r.paradigm != paradigm) continue;
    auto c = categorizer.categorize(r);
    if (!c.category) {
      uncategorized.push_back(r);
      continue;
    }
    ++counts[*c.category];
    ++report.total;
  }
  if (!uncategorized.empty()) throw UncategorizedPrompts(std::move(uncategorized));
  if (report.total == 0) return report;
  for (auto c : categories_of(paradigm))
    report.rows.push_back({c, counts[c], rounded_percent(counts[c], report.total)});
  return report;
}

inline Json to_json(const DistributionReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"category", kPromptCategories.to_string(row.category)}, {"count", row.count}, {"percent", row.percent}});
  return {{"paradigm", kParadigms.to_string(r.paradigm)}, {"total", r.total}, {"rows", rows}};
}

inline std::string to_table(const DistributionReport& r) {
  std::size_t width = 8;
  for (const auto& row : r.rows) width = std::max(width, kPromptCategories.to_string(row.category).size());
  std::string out = std::string(kParadigms.to_string(r.paradigm)) + " (" + std::to_string(r.total) + " prompts)\n";
  char line[256];
  std::snprintf(line, sizeof line, "  %-*s %7s %7s\n", static_cast<int>(width), "category", "count", "percent");
  out += line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "  %-*s %7llu %6llu%%\n", static_cast<int>(width),
                  std::string(kPromptCategories.to_string(row.category)).c_str(),
                  static_cast<unsigned long long>(row.count), static_cast<unsigned long long>(row.percent));
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paradigm simulation

enum class SimulationMode { guardrail, prompt_only };
inline constexpr EnumNames<SimulationMode, 2> kSimulationModes{
    {{{SimulationMode::guardrail, "guardrail"}, {SimulationMode::prompt_only, "prompt_only"}}}};

struct SimulationReport {
  SimulationMode mode = SimulationMode::guardrail;
  std::uint64_t trials = 0;
  double mean_iterations = 0;
  double mean_residual_failures = 0;
  double stalled_fraction = 0;
  bool operator==(const SimulationReport&) const = default;
};

inline Json to_json(const SimulationReport& r) {
  return {{"mode", kSimulationModes.to_string(r.mode)},
          {"trials", r.trials},
          {"mean_iterations", r.mean_iterations},
          {"mean_residual_failures", r.mean_residual_failures},
          {"stalled_fraction", r.stalled_fraction}};
}

struct IssueProfile {
  int test_count = 12;
};

struct TrialResult {
  int iterations = 0;
  int residual_failures = 0;
  bool stalled = false;
};

// Single-issue bundle used by the simulator: TC-1..TC-n in one phase and one issue.
inline ArtifactBundle synthetic_bundle(int test_count) {
  ArtifactBundle b;
  b.requirements.push_back({"REQ-1", "The system satisfies its acceptance tests.", RequirementKind::functional});
  b.stories.push_back({"US-1", "developer", "a working feature", "the issue can close", {"REQ-1"}});
  RoadmapPhase phase{"PH-1", "Simulated phase", "Exercise the loop", {}, {}, {}};
  WorkIssue issue{"ISS-1", "PH-1", "Simulated issue", "", {}, {}, IssueStatus::open};
  for (int i = 1; i <= test_count; ++i) {
    auto id = "TC-" + std::to_string(i);
    b.tests.push_back({id, "US-1", "simulated test " + std::to_string(i),
                       {{ClauseKind::given, "a system"}, {ClauseKind::when, "it runs"}, {ClauseKind::then, "it passes"}}});
    phase.test_ids.push_back(id);
    issue.constraint_test_ids.push_back(id);
  }
  b.phases.push_back(phase);
  b.issues.push_back(issue);
  return b;
}

// One loop run to closure or stall. Guardrail mode feeds plan and test outcomes
// back to the agent; prompt-only mode gives the agent neither, while the same
// tests still decide when the issue closes.
inline TrialResult simulate_trial(ArtifactBundle& bundle, MockAgentParams params, SimulationMode mode,
                                  int max_iterations) {
  bundle.issues.front().status = IssueStatus::open;
  auto world = MockWorld::failing(bundle.issues.front().constraint_test_ids);
  MockAgent agent(params, world, mode == SimulationMode::guardrail);
  MockRunner runner(world);
  LoopEngine engine(bundle, LoopConfig{max_iterations, false});
  engine.with_clock([] { return std::string(); });
  auto run = engine.open_issue("ISS-1");
  engine.run_to_completion(run, agent, runner);
  TrialResult r;
  r.iterations = run.iteration;
  r.stalled = run.state == LoopState::stalled;
  r.residual_failures = static_cast<int>(run.constraint.size() - run.passing.size());
  return r;
}

// Runs both modes on identical per-trial seeds (paired streams).
inline std::pair<SimulationReport, SimulationReport> simulate_paradigms(const MockAgentParams& params,
                                                                        IssueProfile profile, std::uint64_t trials,
                                                                        std::uint64_t seed, int max_iterations) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (profile.test_count < 1) throw std::invalid_argument("test_count must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  params.check();
  auto bundle = synthetic_bundle(profile.test_count);
  SimulationReport reports[2] = {{SimulationMode::guardrail, trials, 0, 0, 0},
                                 {SimulationMode::prompt_only, trials, 0, 0, 0}};
  double sums[2][3] = {};
  for (std::uint64_t t = 0; t < trials; ++t) {
    auto p = params;
    p.seed = trial_seed(seed, t);
    for (int m = 0; m < 2; ++m) {
      auto r = simulate_trial(bundle, p, m == 0 ? SimulationMode::guardrail : SimulationMode::prompt_only,
                              max_iterations);
      sums[m][0] += r.iterations;
      sums[m][1] += r.residual_failures;
      sums[m][2] += r.stalled ? 1 : 0;
    }
  }
  for (int m = 0; m < 2; ++m) {
    auto n = static_cast<double>(trials);
    reports[m].mean_iterations = sums[m][0] / n;
    reports[m].mean_residual_failures = sums[m][1] / n;
    reports[m].stalled_fraction = sums[m][2] / n;
  }
  return {reports[0], reports[1]};
}

}  // namespace shiftup
