#include <gtest/gtest.h>

#include <cfenv>
#include <cmath>

#include "shiftup/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace shiftup {
namespace {

using testing::Composition;
using testing::TempDir;
using testing::closest_composition;
using testing::compositions;
using testing::markov_oracle;
using testing::MarkovExpectation;
using testing::fixture_dir;
using testing::spit;

using C = PromptCategory;

std::vector<PromptRecord> fixture_log() { return load_prompt_log(fixture_dir() / "logs" / "prompts.jsonl"); }

std::vector<std::uint64_t> percents(const DistributionReport& r) {
  std::vector<std::uint64_t> out;
  for (const auto& row : r.rows) out.push_back(row.percent);
  return out;
}

std::vector<std::uint64_t> counts(const DistributionReport& r) {
  std::vector<std::uint64_t> out;
  for (const auto& row : r.rows) out.push_back(row.count);
  return out;
}

PromptRecord prompt(Paradigm p, std::string text) { return {"", p, std::move(text), std::nullopt, std::nullopt}; }

TEST(Categorize, DefaultRules) {
  auto S = Paradigm::shift_up;
  auto V = Paradigm::structured_vibe;
  struct Case {
    Paradigm p;
    const char* text;
    std::optional<C> want;
  } cases[] = {
      {S, "Run the acceptance tests for ISS-3", C::execute_acceptance_tests},
      {S, "Start the next issue", C::initiate_next_plan_step},
      {S, "The total is wrong, please fix it", C::developer_identified_fix},
      {S, "Looks good, accept it", C::accept_agent_solution},
      {S, "Proceed", C::proceed_next_step},
      {S, "PROCEED", C::proceed_next_step},
      {S, "What is the weather?", std::nullopt},
      {V, "The login page crashes", C::manual_issue_fix},
      {V, "Let's plan the checkout", C::feature_planning},
      {V, "Implement a search box", C::new_feature_implementation},
      {V, "continue", C::proceed_next_step},
      {V, "What is the weather?", C::other},
  };
  Categorizer cat;
  for (const auto& c : cases) EXPECT_EQ(cat.categorize(prompt(c.p, c.text)).category, c.want) << c.text;
}

TEST(Categorize, LabelsWin) {
  auto r = prompt(Paradigm::shift_up, "Proceed");
  r.label = C::accept_agent_solution;
  auto c = categorize(r);
  EXPECT_EQ(c.category, C::accept_agent_solution);
  EXPECT_TRUE(c.from_label);
}

TEST(Categorize, DefaultRulesAgreeWithFixtureLabels) {
  Categorizer cat;
  for (auto r : fixture_log()) {
    auto label = r.label;
    r.label.reset();
    EXPECT_EQ(cat.categorize(r).category, label) << r.text;
  }
}

TEST(PromptLog, RoundTripAndErrors) {
  TempDir dir;
  auto log = dir / "nested" / "prompts.jsonl";
  PromptRecord a{"2025-01-01T00:00:00Z", Paradigm::shift_up, "Proceed", "ISS-1", C::proceed_next_step};
  PromptRecord b{"", Paradigm::structured_vibe, "fix the crash", std::nullopt, std::nullopt};
  record_prompt(log, a);
  record_prompt(log, b);
  EXPECT_EQ(load_prompt_log(log), (std::vector<PromptRecord>{a, b}));

  PromptRecord bad = a;
  bad.label = C::other;
  EXPECT_THROW(record_prompt(log, bad), FormatError);
  bad = a;
  bad.text.clear();
  EXPECT_THROW(record_prompt(log, bad), FormatError);

  spit(dir / "bad.jsonl", "{\"paradigm\":\"shift_up\",\"text\":\"x\"}\n\n{\"paradigm\":\"shift_up\",\"text\":\"x\",\"z\":1}\n");
  try {
    load_prompt_log(dir / "bad.jsonl");
    FAIL();
  } catch (const LogFormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  spit(dir / "bad2.jsonl", "{oops\n");
  EXPECT_THROW(load_prompt_log(dir / "bad2.jsonl"), LogFormatError);
  EXPECT_THROW(load_prompt_log(dir / "missing.jsonl"), std::runtime_error);
}

TEST(RoundedPercent, TiesToEven) {
  EXPECT_EQ(rounded_percent(1, 8), 12u);   // 12.5
  EXPECT_EQ(rounded_percent(3, 8), 38u);   // 37.5
  EXPECT_EQ(rounded_percent(1, 3), 33u);
  EXPECT_EQ(rounded_percent(2, 3), 67u);
  EXPECT_EQ(rounded_percent(0, 0), 0u);
  EXPECT_EQ(rounded_percent(5, 5), 100u);
  // Agrees with floating-point round-half-even on every count out of 176.
  std::fesetround(FE_TONEAREST);
  for (std::uint64_t c = 0; c <= 176; ++c)
    EXPECT_EQ(rounded_percent(c, 176), static_cast<std::uint64_t>(std::nearbyint(100.0 * c / 176.0))) << c;
}

TEST(PromptReport, FixtureMatchesPublishedDistribution) {
  auto log = fixture_log();
  auto su = distribution_report(log, Paradigm::shift_up);
  auto sv = distribution_report(log, Paradigm::structured_vibe);
  EXPECT_EQ(su.total, 176u);
  EXPECT_EQ(sv.total, 176u);
  EXPECT_EQ(percents(su), (std::vector<std::uint64_t>{62, 16, 9, 7, 5}));
  EXPECT_EQ(percents(sv), (std::vector<std::uint64_t>{52, 27, 5, 5, 11}));

  // The fixture counts are the oracle's closest compositions.
  for (const auto& [report, target] : {std::pair{su, Composition{62, 16, 9, 7, 5}},
                                       std::pair{sv, Composition{52, 27, 5, 5, 11}}}) {
    ASSERT_FALSE(compositions(target, 176).empty());
    auto best = closest_composition(target, 176);
    EXPECT_EQ(counts(report), std::vector<std::uint64_t>(best.begin(), best.end()));
  }
  EXPECT_EQ(counts(su), (std::vector<std::uint64_t>{109, 29, 16, 13, 9}));
  EXPECT_EQ(counts(sv), (std::vector<std::uint64_t>{91, 48, 9, 9, 19}));
}

TEST(PromptReport, UnlabeledFixtureGivesTheSameReport) {
  auto log = fixture_log();
  auto labeled = distribution_report(log, Paradigm::shift_up);
  for (auto& r : log) r.label.reset();
  EXPECT_EQ(distribution_report(log, Paradigm::shift_up).rows, labeled.rows);
}

TEST(PromptReport, UncategorizedShiftUpPromptsAreRefused) {
  std::vector<PromptRecord> log{prompt(Paradigm::shift_up, "Proceed"), prompt(Paradigm::shift_up, "hmm?"),
                                prompt(Paradigm::structured_vibe, "hmm?")};
  try {
    distribution_report(log, Paradigm::shift_up);
    FAIL();
  } catch (const UncategorizedPrompts& e) {
    ASSERT_EQ(e.records().size(), 1u);
    EXPECT_EQ(e.records()[0].text, "hmm?");
  }
  auto sv = distribution_report(log, Paradigm::structured_vibe);
  EXPECT_EQ(sv.total, 1u);
  EXPECT_EQ(sv.rows.back().category, C::other);
  EXPECT_TRUE(distribution_report({}, Paradigm::shift_up).rows.empty());
}

TEST(PromptReport, TableAndJson) {
  auto r = distribution_report(fixture_log(), Paradigm::shift_up);
  auto table = to_table(r);
  EXPECT_NE(table.find("shift_up (176 prompts)"), std::string::npos);
  EXPECT_NE(table.find("proceed_next_step"), std::string::npos);
  EXPECT_NE(table.find("62%"), std::string::npos);
  EXPECT_EQ(to_json(r)["rows"][0]["percent"], 62);
}

MockAgentParams params(double pt, double pu, double d) {
  return {0, Probability{pt}, Probability{pu}, Probability{d}};
}

TEST(MarkovOracle, ClosedFormsForOneTest) {
  // One test, no regression: geometric with success p, truncated at the cap.
  for (double p : {0.1, 0.5, 0.9}) {
    auto e = markov_oracle(1, p, 0.0, 25);
    EXPECT_NEAR(e.iterations, (1 - std::pow(1 - p, 25)) / p, 1e-12);
    EXPECT_NEAR(e.residual, std::pow(1 - p, 25), 1e-12);
  }
  EXPECT_NEAR(markov_oracle(1, 0.5, 0.0, 100000).iterations, 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(markov_oracle(12, 1.0, 0.0, 25).iterations, 1.0);
  EXPECT_DOUBLE_EQ(markov_oracle(12, 0.0, 0.0, 25).residual, 12.0);
}

TEST(Simulation, GeometricMean) {
  // A cap of 200 truncates a mass of 2^-200.
  auto [g, u] = simulate_paradigms(params(0.5, 0.5, 0.0), {1}, 10000, 7, 200);
  EXPECT_NEAR(g.mean_iterations, 2.0, 0.1);
  EXPECT_EQ(g.stalled_fraction, 0.0);
  EXPECT_EQ(g, (SimulationReport{SimulationMode::guardrail, u.trials, u.mean_iterations, u.mean_residual_failures,
                                 u.stalled_fraction}));
}

void expect_matches_markov_oracle(const SimulationReport& mc, const MarkovExpectation& e, int n) {
  EXPECT_NEAR(mc.mean_iterations, e.iterations, 0.03 * e.iterations);
  EXPECT_NEAR(mc.mean_residual_failures / n, e.residual / n, 0.03);
  EXPECT_NEAR(mc.stalled_fraction, e.stalled, 0.03);
}

TEST(Simulation, OneTestMatchesMarkovOracle) {
  auto [g, u] = simulate_paradigms(params(0.5, 0.1, 0.05), {1}, 10000, 7, 25);
  expect_matches_markov_oracle(g, markov_oracle(1, 0.5, 0.05, 25), 1);
  expect_matches_markov_oracle(u, markov_oracle(1, 0.1, 0.05, 25), 1);
  EXPECT_NEAR(markov_oracle(1, 0.1, 0.05, 25).iterations, 9.28, 0.01);
}

TEST(Simulation, TwelveTestsMatchMarkovOracle) {
  auto [g, u] = simulate_paradigms(params(0.5, 0.1, 0.05), {12}, 2000, 7, 25);
  expect_matches_markov_oracle(g, markov_oracle(12, 0.5, 0.05, 25), 12);
  expect_matches_markov_oracle(u, markov_oracle(12, 0.1, 0.05, 25), 12);
}

TEST(Simulation, GuardrailLeavesFewerFailuresAtDefaults) {
  auto [g, u] = simulate_paradigms(params(0.5, 0.1, 0.05), {12}, 1000, 7, 25);
  EXPECT_LT(g.mean_residual_failures, u.mean_residual_failures);
  EXPECT_LT(g.mean_iterations, u.mean_iterations);
  EXPECT_EQ(g.trials, 1000u);
  EXPECT_EQ(g.mode, SimulationMode::guardrail);
  EXPECT_EQ(u.mode, SimulationMode::prompt_only);
}

TEST(Simulation, SymmetryControl) {
  for (double p : {0.1, 0.3, 0.5}) {
    auto [g, u] = simulate_paradigms(params(p, p, 0.05), {12}, 300, 7, 25);
    EXPECT_NEAR(g.mean_residual_failures, u.mean_residual_failures, 0.02 * std::max(1e-9, u.mean_residual_failures));
    EXPECT_NEAR(g.mean_iterations, u.mean_iterations, 0.02 * u.mean_iterations);
  }
}

TEST(Simulation, DeterministicForASeed) {
  auto a = simulate_paradigms(params(0.5, 0.1, 0.05), {5}, 200, 99, 10);
  auto b = simulate_paradigms(params(0.5, 0.1, 0.05), {5}, 200, 99, 10);
  EXPECT_EQ(a, b);
  auto c = simulate_paradigms(params(0.5, 0.1, 0.05), {5}, 200, 100, 10);
  EXPECT_NE(a.first, c.first);
}

TEST(Simulation, DegenerateParameters) {
  auto [g, u] = simulate_paradigms(params(1.0, 1.0, 0.0), {12}, 50, 1, 25);
  EXPECT_EQ(g.mean_iterations, 1.0);
  EXPECT_EQ(u.mean_iterations, 1.0);
  auto [g0, u0] = simulate_paradigms(params(0.0, 0.0, 0.0), {4}, 20, 1, 3);
  EXPECT_EQ(g0.mean_iterations, 3.0);
  EXPECT_EQ(g0.mean_residual_failures, 4.0);
  EXPECT_EQ(g0.stalled_fraction, 1.0);
  EXPECT_THROW(simulate_paradigms(params(0.1, 0.5, 0.0), {4}, 20, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_paradigms(params(0.5, 0.1, 0.0), {0}, 20, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_paradigms(params(0.5, 0.1, 0.0), {4}, 0, 1, 3), std::invalid_argument);
  EXPECT_THROW(simulate_paradigms(params(0.5, 0.1, 0.0), {4}, 20, 1, 0), std::invalid_argument);
}

TEST(Simulation, ReportJson) {
  SimulationReport r{SimulationMode::prompt_only, 3, 1.5, 0.25, 0.0};
  auto j = to_json(r);
  EXPECT_EQ(j["mode"], "prompt_only");
  EXPECT_EQ(j["mean_residual_failures"], 0.25);
}

}  // namespace
}  // namespace shiftup
