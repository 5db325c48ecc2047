#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "shiftup/gwt.hpp"
#include "support.hpp"

namespace shiftup::gwt {
namespace {

namespace fs = std::filesystem;
using shiftup::testing::fixture_dir;
using shiftup::testing::slurp;

constexpr const char* kTwoTests =
    "test: TC-1\n"
    "story: US-1\n"
    "name: Add one product\n"
    "Given the cart is empty\n"
    "When the customer adds Coffee\n"
    "Then the cart contains 1 Coffee\n"
    "\n"
    "test: TC-2\n"
    "story: US-1\n"
    "name: Remove the last line\n"
    "Given the cart contains only Coffee\n"
    "And the customer is logged in\n"
    "When the customer removes Coffee\n"
    "Then the cart is empty\n"
    "And the checkout button is disabled\n";

std::vector<fs::path> corpus_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fixture_dir() / "tests"))
    if (e.path().extension() == ".gwt") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

TEST(GwtParse, TwoTests) {
  auto r = parse_gwt(kTwoTests, "cart.gwt");
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.file.tests.size(), 2u);
  const auto& t = r.file.tests[1];
  EXPECT_EQ(t.id, "TC-2");
  EXPECT_EQ(t.story_ref, "US-1");
  ASSERT_EQ(t.clauses.size(), 5u);
  EXPECT_EQ(t.clauses[1].kind, ClauseKind::given);
  EXPECT_EQ(t.clauses[1].text, "the customer is logged in");
  EXPECT_EQ(t.clauses[4].kind, ClauseKind::then);
  EXPECT_EQ(render_gwt(r.file), kTwoTests);
}

TEST(GwtParse, ToleratesCrlfCommentsAndIndentation) {
  std::string text = "# cart scenarios\r\n\r\n  test: TC-1\r\nstory: US-1\r\nname: n\r\n  Given a\r\nWhen b\r\nThen c\r\n";
  auto r = parse_gwt(text);
  ASSERT_TRUE(r.ok()) << r.errors.front().message;
  EXPECT_EQ(r.file.tests.front().clauses.back().text, "c");
}

struct ErrorCase {
  const char* text;
  std::size_t line;
  const char* fragment;
};

class GwtErrors : public ::testing::TestWithParam<ErrorCase> {};

TEST_P(GwtErrors, ReportsLineAndMessage) {
  const auto& c = GetParam();
  auto r = parse_gwt(c.text);
  ASSERT_FALSE(r.ok());
  bool found = false;
  for (const auto& e : r.errors) found |= e.line == c.line && e.message.find(c.fragment) != std::string::npos;
  EXPECT_TRUE(found) << "first error: line " << r.errors.front().line << ": " << r.errors.front().message;
}

INSTANTIATE_TEST_SUITE_P(
    Cases, GwtErrors,
    ::testing::Values(
        ErrorCase{"", 1, "at least one test block"},
        ErrorCase{"# only a comment\n", 1, "at least one test block"},
        ErrorCase{"story: US-1\ntest: TC-1\nname: n\nGiven a\nWhen b\nThen c\n", 1, "expected 'test"},
        ErrorCase{"test: TC-01\nstory: US-1\nname: n\nGiven a\nWhen b\nThen c\n", 1, "test id"},
        ErrorCase{"test: TC-1\nstory: REQ-1\nname: n\nGiven a\nWhen b\nThen c\n", 2, "story id"},
        ErrorCase{"test: TC-1\nstory: US-1\nname:\nGiven a\nWhen b\nThen c\n", 3, "empty header"},
        ErrorCase{"test: TC-1\nstory: US-1\n", 2, "missing header field 'name'"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nAnd a\nWhen b\nThen c\n", 4, "And without preceding clause"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nGiven a\nThen c\nWhen b\n", 6, "clause order"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nGiven a\nThen c\n", 5, "no 'when' clause"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen\nThen c\n", 5, "no text"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen b\nThen c\nBut d\n", 7, "expected 'Given'"},
        ErrorCase{"test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen b\nThen c\n\n"
                  "test: TC-1\nstory: US-1\nname: n\nGiven a\nWhen b\nThen c\n",
                  8, "duplicate test id"}));

TEST(GwtParse, GoodBlocksSurviveBadNeighbours) {
  auto r = parse_gwt(std::string("test: TC-9\nstory: US-1\nname: n\nWhen x\n\n") + kTwoTests);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.file.tests.size(), 2u);
}

TEST(GwtRender, RepeatedKindsBecomeAnd) {
  GwtFile f{"", {{"TC-4", "US-2", "n", {{ClauseKind::given, "a"}, {ClauseKind::given, "b"}, {ClauseKind::when, "c"},
                                         {ClauseKind::then, "d"}}}}};
  EXPECT_EQ(render_gwt(f), "test: TC-4\nstory: US-2\nname: n\nGiven a\nAnd b\nWhen c\nThen d\n");
}

TEST(GwtCorpus, HoldsTheFullSuite) {
  std::size_t tests = 0;
  for (const auto& p : corpus_files()) tests += parse_gwt(slurp(p)).file.tests.size();
  EXPECT_EQ(tests, 175u);
}

// render(parse(text)) == text for canonical files, and parse(render(x)) == x.
TEST(GwtCorpus, RoundTripsBothWays) {
  for (const auto& p : corpus_files()) {
    auto text = slurp(p);
    auto r = parse_gwt(text, p.filename().string());
    ASSERT_TRUE(r.ok()) << p;
    EXPECT_EQ(render_gwt(r.file), text) << p;
    auto again = parse_gwt(render_gwt(r.file), p.filename().string());
    ASSERT_TRUE(again.ok());
    EXPECT_EQ(again.file.tests, r.file.tests) << p;
  }
}

TEST(GwtLint, Rules) {
  AcceptanceTest t{"TC-1", "US-1", std::string(121, 'x'),
                   {{ClauseKind::given, "a"}, {ClauseKind::when, "b"}, {ClauseKind::when, "c"},
                    {ClauseKind::then, "it saves and closes"}, {ClauseKind::then, "a"}}};
  std::vector<std::string> rules;
  for (const auto& w : lint_test(t)) rules.push_back(w.rule);
  EXPECT_EQ(rules, (std::vector<std::string>{"multiple-when", "then-conjunction", "long-name", "duplicate-clause"}));

  AcceptanceTest clean{"TC-2", "US-1", "n", {{ClauseKind::given, "a"}, {ClauseKind::when, "b"},
                                             {ClauseKind::then, "the brand band is standard"}}};
  EXPECT_TRUE(lint_test(clean).empty());
}

// Pinned after the first run over the corpus: every warning is a Then clause
// joining two outcomes with "and".
TEST(GwtLint, CorpusGoldenCount) {
  std::vector<std::string> ids;
  for (const auto& p : corpus_files())
    for (const auto& w : lint_gwt(parse_gwt(slurp(p)).file)) {
      EXPECT_EQ(w.rule, "then-conjunction");
      ids.push_back(w.test_id);
    }
  EXPECT_EQ(ids, (std::vector<std::string>{"TC-35", "TC-38", "TC-88", "TC-93", "TC-141", "TC-154", "TC-158",
                                           "TC-174", "TC-175"}));
}

void check_total(std::string_view text) {
  ParseResult r;
  ASSERT_NO_THROW(r = parse_gwt(text));
  auto lines = std::max<std::size_t>(1, detail::split_lines(text).size());
  for (const auto& e : r.errors) {
    EXPECT_GE(e.line, 1u);
    EXPECT_LE(e.line, lines);
    EXPECT_FALSE(e.message.empty());
  }
  if (r.ok()) {
    // Anything accepted renders to canonical text that parses back identically.
    auto again = parse_gwt(render_gwt(r.file));
    EXPECT_TRUE(again.ok());
    EXPECT_EQ(again.file.tests, r.file.tests);
  }
}

TEST(GwtFuzz, LineMutationsOfTheCorpus) {
  std::vector<std::string> lines;
  for (const auto& p : corpus_files()) {
    auto text = slurp(p);
    for (auto l : detail::split_lines(text)) lines.emplace_back(l);
  }
  const char* keywords[] = {"Given ", "When ", "Then ", "And ", "test: TC-", "story: US-", "name: ", "# ", "", "  "};
  std::mt19937_64 rng(20251019);
  for (int i = 0; i < 1500; ++i) {
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
    SCOPED_TRACE(text);
    check_total(text);
    if (HasFailure()) return;
  }
}

TEST(GwtFuzz, RandomBytes) {
  std::mt19937_64 rng(7);
  const std::string alphabet = "GivenWhThA d:tsyrmTCUS-0123456789#\n\r\t\x01\xff";
  for (int i = 0; i < 1000; ++i) {
    std::string text(rng() % 200, ' ');
    for (auto& c : text) c = alphabet[rng() % alphabet.size()];
    check_total(text);
    if (HasFailure()) return;
  }
}

}  // namespace
}  // namespace shiftup::gwt
