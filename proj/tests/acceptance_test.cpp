// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "random_bundle.hpp"
#include "shiftup/cli.hpp"
#include "support.hpp"

namespace shiftup::testing {
namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failed expectations of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) detail_ += (detail_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " failed: " + detail_};
  }

 private:
  int failures_ = 0;
  std::string detail_;
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string cli() { return std::string(SHIFTUP_CLI); }

Outcome fixture_fidelity() {
  Check c;
  auto r = load_bundle(fixture_dir());
  c.expect(r.ok(), "fixture does not load");
  if (!r.ok()) return c.done("");
  const auto& b = *r.bundle;
  c.expect(validate(b).empty(), "violations present");
  c.expect(b.stories.size() == 68, "stories " + std::to_string(b.stories.size()));
  c.expect(b.tests.size() == 175, "tests " + std::to_string(b.tests.size()));
  c.expect(b.phases.size() == 10, "phases " + std::to_string(b.phases.size()));
  auto start = std::chrono::steady_clock::now();
  auto lint = run_shell(cli() + " --root " + fixture_dir().string() + " lint", "");
  double t = seconds_since(start);
  c.expect(lint.exit_code == 0, "lint exited " + std::to_string(lint.exit_code));
  c.expect(t < 1.0, fmt("lint took %.3f s", t));
  return c.done(fmt("68 stories, 175 tests, 10 phases, 0 violations, lint exit 0 in %.3f s", t));
}

std::vector<fs::path> corpus_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fixture_dir() / "tests"))
    if (e.path().extension() == ".gwt") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Parsing never throws; errors carry in-range line numbers; accepted text round-trips.
void check_total(Check& c, std::string_view text) {
  gwt::ParseResult r;
  try {
    r = gwt::parse_gwt(text);
  } catch (const std::exception& e) {
    c.expect(false, std::string("parser threw: ") + e.what());
    return;
  }
  auto lines = std::max<std::size_t>(1, gwt::detail::split_lines(text).size());
  for (const auto& e : r.errors) c.expect(e.line >= 1 && e.line <= lines, "error line out of range");
  if (r.ok()) {
    auto again = gwt::parse_gwt(gwt::render_gwt(r.file));
    c.expect(again.ok() && again.file.tests == r.file.tests, "accepted input does not round-trip");
  }
}

Outcome parser_suite() {
  Check c;
  std::size_t tests = 0, files = 0;
  std::vector<std::string> lines;
  for (const auto& p : corpus_files()) {
    auto text = slurp(p);
    auto r = gwt::parse_gwt(text, p.filename().string());
    c.expect(r.ok(), p.filename().string() + " does not parse");
    c.expect(gwt::render_gwt(r.file) == text, p.filename().string() + ": render(parse(text)) != text");
    auto again = gwt::parse_gwt(gwt::render_gwt(r.file));
    c.expect(again.ok() && again.file.tests == r.file.tests, p.filename().string() + ": parse(render(x)) != x");
    tests += r.file.tests.size();
    ++files;
    for (auto l : gwt::detail::split_lines(text)) lines.emplace_back(l);
  }
  c.expect(tests == 175, "corpus holds " + std::to_string(tests) + " tests");

  // Malformed inputs report the offending line.
  const std::pair<const char*, std::size_t> errors[] = {
      {"story: US-1\ntest: TC-1\nname: n\nGiven a\nWhen b\nThen c\n", 1},
      {"test: TC-1\nstory: REQ-1\nname: n\nGiven a\nWhen b\nThen c\n", 2},
      {"test: TC-1\nstory: US-1\nname:\nGiven a\nWhen b\nThen c\n", 3},
      {"test: TC-1\nstory: US-1\nname: n\nAnd a\nWhen b\nThen c\n", 4},
      {"test: TC-1\nstory: US-1\nname: n\nGiven a\nThen c\nWhen b\n", 6},
      {"test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen\nThen c\n", 5},
      {"test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen b\nThen c\nBut d\n", 7},
  };
  std::size_t error_cases = 0;
  for (const auto& [text, line] : errors) {
    auto r = gwt::parse_gwt(text);
    bool found = std::any_of(r.errors.begin(), r.errors.end(), [&](const auto& e) { return e.line == line; });
    c.expect(!r.ok() && found, std::string("no error at line ") + std::to_string(line));
    ++error_cases;
  }

  std::mt19937_64 rng(20251019);
  const char* keywords[] = {"Given ", "When ", "Then ", "And ", "test: TC-", "story: US-", "name: ", "# ", "", "  "};
  std::size_t fuzz = 0;
  for (int i = 0; i < 1000; ++i, ++fuzz) {
    std::string text;
    int n = std::uniform_int_distribution<int>(0, 20)(rng);
    for (int k = 0; k < n; ++k) {
      std::string line = lines[rng() % lines.size()];
      switch (rng() % 6) {
        case 0: line = keywords[rng() % std::size(keywords)] + line.substr(line.find(' ') + 1); break;
        case 1: line = line.substr(0, rng() % (line.size() + 1)); break;
        case 2: line = keywords[rng() % std::size(keywords)] + std::to_string(rng() % 300); break;
        default: break;
      }
      text += line + (rng() % 7 == 0 ? "\r\n" : "\n");
    }
    check_total(c, text);
  }
  const std::string alphabet = "GivenWhThA d:tsyrmTCUS-0123456789#\n\r\t\x01\xff";
  for (int i = 0; i < 1000; ++i, ++fuzz) {
    std::string text(rng() % 200, ' ');
    for (auto& ch : text) ch = alphabet[rng() % alphabet.size()];
    check_total(c, text);
  }
  return c.done(std::to_string(tests) + " tests in " + std::to_string(files) + " files round-trip both ways, " +
                std::to_string(fuzz) + " fuzz inputs without a crash, " + std::to_string(error_cases) +
                " error cases with line numbers");
}

Outcome graph_properties() {
  Check c;
  std::mt19937_64 rng(424242);
  std::size_t impact_checks = 0, deletions = 0;
  for (int i = 0; i < 200; ++i) {
    auto b = random_dag_bundle(rng);
    auto g = build_graph(b);
    auto order = phase_order(g);
    c.expect(valid_topological(b, order), "invalid order in bundle " + std::to_string(i));
    c.expect(order == oracle_order(b), "order differs from the oracle in bundle " + std::to_string(i));
    auto shuffled = b;
    std::shuffle(shuffled.phases.begin(), shuffled.phases.end(), rng);
    for (auto& p : shuffled.phases) std::shuffle(p.depends_on.begin(), p.depends_on.end(), rng);
    c.expect(phase_order(build_graph(shuffled)) == order, "order depends on input order in bundle " + std::to_string(i));

    for (const auto& [id, type] : g.nodes()) {
      auto got = impact_of(g, id);
      c.expect(std::set<std::string>(got.begin(), got.end()) == oracle_impact(g, id), "impact_of(" + id + ") differs");
      ++impact_checks;
    }

    auto prev = coverage_report(g);
    std::vector<Edge> edges(g.edges().begin(), g.edges().end());
    std::shuffle(edges.begin(), edges.end(), rng);
    edges.resize(edges.size() / 2);
    for (const auto& e : edges) {
      g.remove_edge(e);
      auto now = coverage_report(g);
      c.expect(now.story_coverage <= prev.story_coverage && now.requirement_coverage <= prev.requirement_coverage &&
                   now.test_constraint_coverage <= prev.test_constraint_coverage &&
                   now.test_phase_coverage <= prev.test_phase_coverage,
               "coverage rose after deleting an edge in bundle " + std::to_string(i));
      prev = now;
      ++deletions;
    }
  }
  return c.done("200 random DAG bundles: valid deterministic order, " + std::to_string(deletions) +
                " antitone deletions, " + std::to_string(impact_checks) + " impact sets equal the oracle");
}

Outcome loop_invariants() {
  Check c;
  auto base = *load_bundle(fixture_dir()).bundle;
  int closed = 0, stalled = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    double d = seed % 2 ? 0.0 : 0.1;
    MockAgentParams params{seed, Probability{0.4}, Probability{0.1}, Probability{d}};
    auto bundle = base;
    const auto& issue = bundle.issues[seed % 2];
    auto world = MockWorld::failing(issue.constraint_test_ids);
    MockAgent agent(params, world);
    MockRunner runner(world);
    LoopEngine engine(bundle, LoopConfig{static_cast<int>(1 + seed % 25), seed % 3 == 0});
    engine.with_clock(fixed_clock);
    auto run = engine.open_issue(issue.id);
    engine.run_to_completion(run, agent, runner);

    for (std::size_t i = 1; i < run.events.size(); ++i)
      c.expect(run.events[i].seq > run.events[i - 1].seq, "seq not increasing for seed " + std::to_string(seed));
    std::set<std::string> constraint(run.constraint.begin(), run.constraint.end());
    bool subset = std::includes(run.passing.begin(), run.passing.end(), constraint.begin(), constraint.end(), IdLess{});
    c.expect((run.state == LoopState::issue_closed) == subset, "close rule broken for seed " + std::to_string(seed));
    (run.state == LoopState::issue_closed ? closed : stalled)++;
    if (d == 0.0) {
      std::set<std::string> prev;
      for (const auto& e : run.events) {
        if (e.kind != "tests_run") continue;
        auto now = e.payload["passing"].get<std::set<std::string>>();
        c.expect(std::includes(now.begin(), now.end(), prev.begin(), prev.end()),
                 "passing set shrank without regression for seed " + std::to_string(seed));
        prev = now;
      }
    }
    std::vector<LoopEvent> logged;
    for (const auto& e : run.events) logged.push_back(event_from_json(Json::parse(to_json(e).dump())));
    c.expect(replay(logged) == run, "replay differs for seed " + std::to_string(seed));
  }
  c.expect(closed > 0 && stalled > 0, "expected both closed and stalled runs");
  return c.done("500 seeds (" + std::to_string(closed) + " closed, " + std::to_string(stalled) +
                " stalled): seqs increase, close iff all pass, monotone without regression, replay exact");
}

MockAgentParams params(double pt, double pu, double d) { return {0, Probability{pt}, Probability{pu}, Probability{d}}; }

Outcome geometric_check() {
  Check c;
  auto [g, u] = simulate_paradigms(params(0.5, 0.5, 0.0), {1}, 10000, 7, 200);
  c.expect(std::abs(g.mean_iterations - 2.0) <= 0.1, fmt("mean generate calls %.4f", g.mean_iterations));
  return c.done(fmt("mean generate calls %.4f (expected 2.0 +- 0.1)", g.mean_iterations));
}

Outcome rq2_check() {
  Check c;
  auto [g, u] = simulate_paradigms(params(0.5, 0.1, 0.05), {12}, 1000, 7, 25);
  c.expect(g.mean_residual_failures < u.mean_residual_failures,
           fmt("guardrail residual %.4f not below prompt-only %.4f", g.mean_residual_failures, u.mean_residual_failures));

  auto [g1, u1] = simulate_paradigms(params(0.5, 0.1, 0.05), {1}, 10000, 7, 25);
  double worst = 0;
  for (const auto& [mc, p] : {std::pair{g1, 0.5}, std::pair{u1, 0.1}}) {
    auto e = markov_oracle(1, p, 0.05, 25);
    double rel = std::abs(mc.mean_iterations - e.iterations) / e.iterations;
    worst = std::max(worst, rel);
    c.expect(rel <= 0.03, fmt("iterations %.4f vs exact %.4f", mc.mean_iterations, e.iterations));
    c.expect(std::abs(mc.mean_residual_failures - e.residual) <= 0.03,
             fmt("residual %.4f vs exact %.4f", mc.mean_residual_failures, e.residual));
  }

  auto [gs, us] = simulate_paradigms(params(0.3, 0.3, 0.05), {12}, 1000, 7, 25);
  double sym_iter = std::abs(gs.mean_iterations - us.mean_iterations) / us.mean_iterations;
  double sym_res = std::abs(gs.mean_residual_failures - us.mean_residual_failures) /
                   std::max(1e-12, us.mean_residual_failures);
  c.expect(sym_iter < 0.02 && sym_res < 0.02, fmt("symmetry gap %.4f / %.4f", sym_iter, sym_res));
  return c.done(fmt("residual guardrail %.4f < prompt-only %.4f; 1-test Markov gap %.2f%%", g.mean_residual_failures,
                    u.mean_residual_failures, 100 * worst) +
                fmt("; symmetry gap %.2f%%", 100 * std::max(sym_iter, sym_res)));
}

Outcome prompt_report() {
  Check c;
  auto start = std::chrono::steady_clock::now();
  auto r = run_shell(cli() + " --root " + fixture_dir().string() + " prompts report --format json", "");
  double t = seconds_since(start);
  c.expect(r.exit_code == 0, "prompts report exited " + std::to_string(r.exit_code));
  c.expect(t < 1.0, fmt("report took %.3f s", t));
  if (r.exit_code != 0) return c.done("");
  auto j = Json::parse(r.out);
  const Composition targets[] = {{62, 16, 9, 7, 5}, {52, 27, 5, 5, 11}};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& rep = j["reports"][k];
    c.expect(rep["total"] == 176, "total is not 176");
    Composition pct{}, counts{};
    for (std::size_t i = 0; i < 5; ++i) {
      pct[i] = rep["rows"][i]["percent"].get<std::uint64_t>();
      counts[i] = rep["rows"][i]["count"].get<std::uint64_t>();
    }
    c.expect(pct == targets[k], "percentages differ for " + rep["paradigm"].get<std::string>());
    c.expect(counts == closest_composition(targets[k], 176), "counts are not the oracle's composition");
  }
  auto text = run_shell(cli() + " --root " + fixture_dir().string() + " prompts report", "");
  for (const char* p : {"62%", "16%", "9%", "7%", "5%", "52%", "27%", "11%"})
    c.expect(text.out.find(p) != std::string::npos, std::string("table lacks ") + p);
  return c.done(fmt("62/16/9/7/5 %% and 52/27/5/5/11 %% over 176 records each, counts from the composition oracle, %.3f s", t));
}

std::vector<Json> stripped_events(const fs::path& root) {
  std::vector<Json> out;
  std::istringstream in(slurp(root / kLoopEventLog));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto j = Json::parse(line);
    j.erase("ts");
    out.push_back(j);
  }
  return out;
}

Outcome cli_api_parity() {
  Check c;
  FixtureCopy via_cli, via_http;
  auto run = run_shell(cli() + " --root " + via_cli.root().string() + " loop run --issue ISS-1 --seed 42", "");
  c.expect(run.exit_code == 0, "CLI loop run exited " + std::to_string(run.exit_code) + ": " + run.err);

  Workspace ws(via_http.root());
  Service service(ws);
  int port = service.bind_any_port("127.0.0.1");
  std::thread server([&] { service.listen_after_bind(); });
  service.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& action, const std::string& body = "") {
    auto r = client.Post("/api/loop/ISS-1/" + action, body, "application/json");
    c.expect(r && r->status == 200, "POST " + action + " failed");
    return r && r->status == 200 ? Json::parse(r->body) : Json();
  };
  post("open", R"({"seed": 42})");
  post("plan");
  auto state = post("approve");
  int steps = 0;
  while (state.is_object() && state["state"] != "issue_closed" && state["state"] != "stalled" && steps++ < 200)
    state = post("step");
  service.stop();
  server.join();
  c.expect(state.is_object() && state["state"] == "issue_closed", "HTTP run did not close");

  auto a = stripped_events(via_cli.root()), b = stripped_events(via_http.root());
  c.expect(!a.empty() && a == b, "event logs differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  c.expect(slurp(via_cli.root() / "issues" / "ISS-1.json") == slurp(via_http.root() / "issues" / "ISS-1.json"),
           "issue files differ");
  return c.done("ISS-1 closed via CLI and HTTP with identical " + std::to_string(a.size()) + "-event logs");
}

}  // namespace
}  // namespace shiftup::testing

int main() {
  using namespace shiftup::testing;
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"fixture-fidelity", fixture_fidelity}, {"parser-suite", parser_suite},   {"graph-properties", graph_properties},
      {"loop-invariants", loop_invariants},   {"geometric-check", geometric_check}, {"rq2-directional", rq2_check},
      {"prompt-report", prompt_report},       {"cli-api-parity", cli_api_parity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
