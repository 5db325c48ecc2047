#pragma once

// `shiftup` command line. Exit codes: 0 ok, 1 domain failure, 2 environment failure.

#include <cstdlib>
#include <iostream>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "service.hpp"
#include "workspace.hpp"

namespace shiftup::cli {

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kEnvironmentFailure = 2 };

inline fs::path resolve_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SHIFTUP_ROOT"); env && *env) return env;
  return fs::current_path();
}

namespace detail {

inline int report_load_failure(const LoadResult& r, std::ostream& err) {
  for (const auto& v : r.errors) err << to_string(v) << '\n';
  return r.io_failure ? kEnvironmentFailure : kDomainFailure;
}

inline std::optional<ArtifactBundle> load_or_report(const fs::path& root, std::ostream& err, int& code) {
  auto r = load_bundle(root);
  if (!r.ok()) {
    code = report_load_failure(r, err);
    return std::nullopt;
  }
  return std::move(r.bundle);
}

}  // namespace detail

inline int cmd_lint(const fs::path& root, bool style, std::ostream& out, std::ostream& err) {
  auto r = load_bundle(root);
  if (!r.ok()) {
    for (const auto& v : r.errors) out << to_string(v) << '\n';
    if (!r.io_failure) err << r.errors.size() << " violation(s)\n";
    return r.io_failure ? kEnvironmentFailure : kDomainFailure;
  }
  const auto& b = *r.bundle;
  try {
    phase_order(build_graph(b));
  } catch (const DependencyCycle& e) {
    std::string members;
    for (const auto& m : e.members()) members += (members.empty() ? "" : ", ") + m;
    out << to_string(Violation{"", "phase-dependency-cycle", members, "roadmap/phases.json", 0}) << '\n';
    err << "1 violation(s)\n";
    return kDomainFailure;
  }
  for (const auto& w : warnings(b)) out << "warning: " << to_string(w) << '\n';
  if (style) {
    for (const auto& t : b.tests)
      for (const auto& w : gwt::lint_test(t)) out << "style: tests/" << t.file << ": [" << w.rule << "] " << w.test_id << ": " << w.detail << '\n';
  }
  out << "ok: " << b.requirements.size() << " requirements, " << b.stories.size() << " stories, " << b.tests.size()
      << " tests, " << b.phases.size() << " phases, " << b.issues.size() << " issues, " << b.adrs.size() << " ADRs\n";
  return kOk;
}

inline int cmd_order(const fs::path& root, const std::string& format, std::ostream& out, std::ostream& err) {
  int code = kOk;
  auto b = detail::load_or_report(root, err, code);
  if (!b) return code;
  try {
    auto order = phase_order(build_graph(*b));
    if (format == "json") {
      out << Json{{"order", order}}.dump(2) << '\n';
    } else {
      for (const auto& p : order) out << p << '\n';
    }
  } catch (const DependencyCycle& e) {
    err << "dependency cycle:";
    for (const auto& m : e.members()) err << ' ' << m;
    err << '\n';
    return kDomainFailure;
  }
  return kOk;
}

inline int cmd_coverage(const fs::path& root, const std::string& format, std::ostream& out, std::ostream& err) {
  int code = kOk;
  auto b = detail::load_or_report(root, err, code);
  if (!b) return code;
  auto r = coverage_report(build_graph(*b));
  if (format == "json") {
    out << to_json(r).dump(2) << '\n';
    return kOk;
  }
  auto list = [&](const char* title, const std::vector<std::string>& ids) {
    out << title << ": " << ids.size();
    for (const auto& id : ids) out << ' ' << id;
    out << '\n';
  };
  list("stories without tests", r.uncovered_stories);
  list("requirements without stories", r.uncovered_requirements);
  list("tests without issues", r.unconstrained_tests);
  list("tests without phases", r.unphased_tests);
  list("tests in several phases", r.multi_phase_tests);
  char line[160];
  std::snprintf(line, sizeof line,
                "ratios: stories %.3f, requirements %.3f, test constraints %.3f, test phases %.3f\n",
                r.story_coverage, r.requirement_coverage, r.test_constraint_coverage, r.test_phase_coverage);
  out << line;
  return kOk;
}

inline int cmd_graph(const fs::path& root, const std::string& format, std::ostream& out, std::ostream& err) {
  int code = kOk;
  auto b = detail::load_or_report(root, err, code);
  if (!b) return code;
  auto g = build_graph(*b);
  if (format == "dot") out << to_dot(g);
  else out << to_json(g).dump(2) << '\n';
  return kOk;
}

inline int cmd_loop_run(const fs::path& root, const std::string& issue, const LoopOptions& options,
                        const std::string& format, std::ostream& out, std::ostream& err) {
  try {
    Workspace ws(root);
    ws.open(issue, options);
    auto run = ws.run_to_completion(issue);
    if (format == "json") {
      out << to_json(run).dump(2) << '\n';
    } else {
      out << run.issue_ref << ": " << kLoopStates.to_string(run.state) << " after " << run.iteration
          << " iteration(s), " << run.passing.size() << "/" << run.constraint.size() << " constraint tests passing\n";
    }
    return run.state == LoopState::issue_closed ? kOk : kDomainFailure;
  } catch (const BundleLoadError& e) {
    return detail::report_load_failure(e.result(), err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironmentFailure;
  } catch (const LoopError& e) {
    err << "error [" << e.code() << "]: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironmentFailure;
  }
}

struct SimulateFlags {
  std::uint64_t trials = 1000;
  std::uint64_t seed = 7;
  std::string mode = "both";
  int tests = 12;
  int max_iterations = 25;
  double targeted = 0.5;
  double untargeted = 0.1;
  double regression = 0.05;
  std::string format = "text";
};

inline int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  MockAgentParams params;
  try {
    params.targeted_success_p = Probability(f.targeted);
    params.untargeted_success_p = Probability(f.untargeted);
    params.regression_rate = Probability(f.regression);
    params.check();
    auto [guard, prompt] = simulate_paradigms(params, {f.tests}, f.trials, f.seed, f.max_iterations);
    std::vector<SimulationReport> shown;
    if (f.mode != "prompt_only") shown.push_back(guard);
    if (f.mode != "guardrail") shown.push_back(prompt);
    if (f.format == "json") {
      Json arr = Json::array();
      for (const auto& r : shown) arr.push_back(to_json(r));
      out << Json{{"reports", arr}}.dump(2) << '\n';
      return kOk;
    }
    char line[200];
    std::snprintf(line, sizeof line, "%-12s %8s %16s %22s %17s\n", "mode", "trials", "mean_iterations",
                  "mean_residual_failures", "stalled_fraction");
    out << line;
    for (const auto& r : shown) {
      std::snprintf(line, sizeof line, "%-12s %8llu %16.4f %22.4f %17.4f\n",
                    std::string(kSimulationModes.to_string(r.mode)).c_str(), static_cast<unsigned long long>(r.trials),
                    r.mean_iterations, r.mean_residual_failures, r.stalled_fraction);
      out << line;
    }
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
}

inline int cmd_prompts_report(const fs::path& log, const std::string& paradigm, const std::string& format,
                              std::ostream& out, std::ostream& err) {
  std::error_code ec;
  if (!fs::is_regular_file(log, ec)) {
    err << "error: prompt log " << log.string() << " not found\n";
    return kEnvironmentFailure;
  }
  std::vector<PromptRecord> records;
  try {
    records = load_prompt_log(log);
  } catch (const FormatError& e) {
    err << "error: " << log.string() << ": " << e.what() << '\n';
    return kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironmentFailure;
  }
  std::vector<Paradigm> which;
  if (paradigm == "both" || paradigm == "shift_up") which.push_back(Paradigm::shift_up);
  if (paradigm == "both" || paradigm == "structured_vibe") which.push_back(Paradigm::structured_vibe);

  Categorizer categorizer;
  std::vector<DistributionReport> reports;
  try {
    for (auto p : which) reports.push_back(distribution_report(records, p, categorizer));
  } catch (const UncategorizedPrompts& e) {
    err << "error: " << e.what() << ":\n";
    for (const auto& r : e.records()) err << "  " << r.ts << "  " << r.text << '\n';
    return kDomainFailure;
  }
  if (format == "json") {
    Json arr = Json::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    out << Json{{"reports", arr}}.dump(2) << '\n';
  } else {
    for (std::size_t i = 0; i < reports.size(); ++i) out << (i ? "\n" : "") << to_table(reports[i]);
  }
  return kOk;
}

inline int cmd_prompts_record(const fs::path& log, const std::string& paradigm, const std::string& text,
                              const std::string& issue, const std::string& label, std::ostream& err) {
  try {
    PromptRecord r;
    r.ts = utc_now();
    r.paradigm = kParadigms.parse_or_throw(paradigm, "paradigm");
    r.text = text;
    if (!issue.empty()) r.issue_ref = issue;
    if (!label.empty()) r.label = kPromptCategories.parse_or_throw(label, "category");
    record_prompt(log, r);
    return kOk;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kEnvironmentFailure;
  }
}

inline int cmd_serve(const fs::path& root, std::optional<int> port_flag, const std::string& host,
                     const std::string& static_dir, std::ostream& out, std::ostream& err) {
  try {
    Workspace ws(root);
    int port = port_flag.value_or(ws.bundle().config.port);
    std::optional<fs::path> assets;
    if (!static_dir.empty()) assets = static_dir;
    Service service(ws, assets);
    out << "serving " << root.string() << " on http://" << host << ":" << port << std::endl;
    if (!service.listen(host, port)) {
      err << "error: cannot listen on " << host << ":" << port << '\n';
      return kEnvironmentFailure;
    }
    return kOk;
  } catch (const BundleLoadError& e) {
    return detail::report_load_failure(e.result(), err);
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Guardrail artifacts and the implement/verify loop", "shiftup"};
  app.require_subcommand(1);
  std::string root_flag;
  app.add_option("--root", root_flag, "Project root (default: $SHIFTUP_ROOT, then the current directory)");

  std::string order_format = "text", coverage_format = "text", graph_format = "json", loop_format = "text",
              report_format = "text";

  bool style = false;
  auto* lint = app.add_subcommand("lint", "Load and validate the artifact bundle");
  lint->add_flag("--style", style, "Also print given-when-then style warnings");
  auto* order = app.add_subcommand("order", "Print phases in dependency order");
  order->add_option("--format", order_format, "Output format")->check(CLI::IsMember({"text", "json"}));
  auto* coverage = app.add_subcommand("coverage", "Traceability coverage report");
  coverage->add_option("--format", coverage_format, "Output format")->check(CLI::IsMember({"text", "json"}));
  auto* graph = app.add_subcommand("graph", "Emit the traceability graph");
  graph->add_option("--format", graph_format, "Output format")->check(CLI::IsMember({"json", "dot"}));

  auto* loop = app.add_subcommand("loop", "Implement/verify loop");
  loop->require_subcommand(1);
  auto* loop_run = loop->add_subcommand("run", "Drive one issue until it closes or stalls");
  std::string issue, agent_flag;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iter;
  std::optional<double> p_t, p_u, d;
  bool no_approval = false;
  loop_run->add_option("--issue", issue, "Issue id")->required();
  loop_run->add_option("--agent", agent_flag, "Agent adapter")->check(CLI::IsMember({"mock", "command"}));
  loop_run->add_option("--seed", seed, "Mock agent seed");
  loop_run->add_option("--max-iter", max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  loop_run->add_option("--p-targeted", p_t, "Mock targeted success probability")->check(CLI::Range(0.0, 1.0));
  loop_run->add_option("--p-untargeted", p_u, "Mock untargeted success probability")->check(CLI::Range(0.0, 1.0));
  loop_run->add_option("--regression", d, "Mock regression rate")->check(CLI::Range(0.0, 1.0));
  loop_run->add_flag("--no-approval", no_approval, "Skip the plan approval gate");
  loop_run->add_option("--format", loop_format, "Output format")->check(CLI::IsMember({"text", "json"}));

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Guardrail vs prompt-only simulation with the mock agent");
  simulate->add_option("--trials", sim.trials, "Paired trials")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--mode", sim.mode, "Which report(s) to print")
      ->check(CLI::IsMember({"both", "guardrail", "prompt_only"}));
  simulate->add_option("--tests", sim.tests, "Constraint tests per issue")->check(CLI::PositiveNumber);
  simulate->add_option("--max-iter", sim.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  simulate->add_option("--p-targeted", sim.targeted, "Targeted success probability");
  simulate->add_option("--p-untargeted", sim.untargeted, "Untargeted success probability");
  simulate->add_option("--regression", sim.regression, "Regression rate");
  simulate->add_option("--format", sim.format, "Output format")->check(CLI::IsMember({"text", "json"}));

  auto* prompts = app.add_subcommand("prompts", "Prompt log");
  prompts->require_subcommand(1);
  std::string log_flag, paradigm = "both", text, label, prompt_issue;
  auto* report = prompts->add_subcommand("report", "Category distribution per paradigm");
  report->add_option("--log", log_flag, "Prompt log (default: <root>/logs/prompts.jsonl)");
  report->add_option("--paradigm", paradigm, "Paradigm")->check(CLI::IsMember({"both", "shift_up", "structured_vibe"}));
  report->add_option("--format", report_format, "Output format")->check(CLI::IsMember({"text", "json"}));
  auto* record = prompts->add_subcommand("record", "Append one prompt to the log");
  record->add_option("--log", log_flag, "Prompt log (default: <root>/logs/prompts.jsonl)");
  record->add_option("--paradigm", paradigm, "shift_up or structured_vibe")->required();
  record->add_option("--text", text, "Prompt text")->required();
  record->add_option("--issue", prompt_issue, "Related issue");
  record->add_option("--label", label, "Explicit category");

  auto* serve = app.add_subcommand("serve", "Serve the JSON API");
  std::optional<int> port;
  std::string host = "127.0.0.1", static_dir;
  serve->add_option("--port", port, "Port (default: service.port in shiftup.json)");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--static", static_dir, "Directory of cockpit assets to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kEnvironmentFailure;
  }

  auto root = resolve_root(root_flag);
  auto log_path = log_flag.empty() ? root / kPromptLog : fs::path(log_flag);
  if (lint->parsed()) return cmd_lint(root, style, out, err);
  if (order->parsed()) return cmd_order(root, order_format, out, err);
  if (coverage->parsed()) return cmd_coverage(root, coverage_format, out, err);
  if (graph->parsed()) return cmd_graph(root, graph_format, out, err);
  if (loop_run->parsed()) {
    LoopOptions o;
    if (!agent_flag.empty()) o.agent = kAgentKinds.parse(agent_flag);
    o.seed = seed;
    o.max_iterations = max_iter;
    o.targeted_success_p = p_t;
    o.untargeted_success_p = p_u;
    o.regression_rate = d;
    if (no_approval) o.require_plan_approval = false;
    return cmd_loop_run(root, issue, o, loop_format, out, err);
  }
  if (simulate->parsed()) return cmd_simulate(sim, out, err);
  if (report->parsed()) return cmd_prompts_report(log_path, paradigm, report_format, out, err);
  if (record->parsed()) return cmd_prompts_record(log_path, paradigm, text, prompt_issue, label, err);
  if (serve->parsed()) return cmd_serve(root, port, host, static_dir, out, err);
  return kEnvironmentFailure;
}

}  // namespace shiftup::cli
