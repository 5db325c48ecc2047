#pragma once

// Given-when-then acceptance test format (.gwt).
//
//   # comment
//   test: TC-1
//   story: US-1
//   name: Customer adds an item
//   Given an empty cart
//   When the customer adds a coffee
//   Then the cart holds one item
//   And the total is 2.50
//
// Blocks are separated by one or more blank lines. `And` continues the kind of
// the nearest preceding Given/When/Then. Clause kinds must appear in
// given, when, then order and each kind must appear at least once.

#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "artifacts.hpp"
#include "ids.hpp"

namespace shiftup::gwt {

struct GwtFile {
  std::string path;
  std::vector<AcceptanceTest> tests;
  bool operator==(const GwtFile&) const = default;
};

struct ParseError {
  std::size_t line = 0;  // 1-based
  std::string message;
  bool operator==(const ParseError&) const = default;
};

struct ParseResult {
  GwtFile file;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

struct LintWarning {
  std::string test_id;
  std::string rule;
  std::string detail;
  bool operator==(const LintWarning&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string_view::npos ? text.size() : nl;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  // A trailing newline does not open another line.
  if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') lines.pop_back();
  return lines;
}

// Matches `<keyword> <text>`; returns the trimmed text or nullopt.
inline std::optional<std::string_view> keyword_text(std::string_view line, std::string_view keyword) {
  if (line.size() <= keyword.size() || line.substr(0, keyword.size()) != keyword) return std::nullopt;
  char sep = line[keyword.size()];
  if (sep != ' ' && sep != '\t') return std::nullopt;
  return trim(line.substr(keyword.size() + 1));
}

inline std::optional<std::string_view> header_value(std::string_view line, std::string_view key) {
  if (line.size() < key.size() + 1 || line.substr(0, key.size()) != key || line[key.size()] != ':')
    return std::nullopt;
  return trim(line.substr(key.size() + 1));
}

struct Line {
  std::size_t number;
  std::string_view text;
};

class BlockParser {
 public:
  BlockParser(std::vector<ParseError>& errors, std::set<std::string>& seen) : errors_(errors), seen_(seen) {}

  std::optional<AcceptanceTest> parse(const std::vector<Line>& block) {
    AcceptanceTest test;
    std::size_t pos = 0;
    bool ok = true;

    auto header = [&](std::string_view key, ArtifactType type, std::string& out) {
      if (pos >= block.size()) {
        error(block.back().number, "missing header field '" + std::string(key) + "'");
        return false;
      }
      auto value = header_value(block[pos].text, key);
      if (!value) {
        error(block[pos].number, "expected '" + std::string(key) + ": <value>'");
        return false;
      }
      if (value->empty()) {
        error(block[pos].number, "empty header field '" + std::string(key) + "'");
        return false;
      }
      if (type != ArtifactType::unknown && !is_valid_id(*value, type)) {
        error(block[pos].number, "expected " + std::string(type_name(type)) + " id of the form " +
                                     std::string(prefix_of(type)) + "-<n>, got '" + std::string(*value) + "'");
        return false;
      }
      out = std::string(*value);
      ++pos;
      return true;
    };

    std::size_t header_line = block.front().number;
    if (!header("test", ArtifactType::test, test.id)) return std::nullopt;
    if (!header("story", ArtifactType::story, test.story_ref)) return std::nullopt;
    if (!header("name", ArtifactType::unknown, test.name)) return std::nullopt;

    std::optional<ClauseKind> current;
    for (; pos < block.size(); ++pos) {
      const auto& [number, text] = block[pos];
      auto clause = classify(text);
      if (!clause) {
        error(number, "expected 'Given', 'When', 'Then' or 'And' followed by text");
        ok = false;
        continue;
      }
      auto [kind_opt, body] = *clause;
      if (body.empty()) {
        error(number, "clause has no text");
        ok = false;
        continue;
      }
      ClauseKind kind;
      if (!kind_opt) {
        if (!current) {
          error(number, "And without preceding clause");
          ok = false;
          continue;
        }
        kind = *current;
      } else {
        kind = *kind_opt;
        if (current && static_cast<int>(kind) < static_cast<int>(*current)) {
          error(number, "clause order: '" + std::string(kClauseKinds.to_string(kind)) + "' after '" +
                            std::string(kClauseKinds.to_string(*current)) + "'");
          ok = false;
          continue;
        }
        current = kind;
      }
      test.clauses.push_back({kind, std::string(body)});
    }

    if (!ok) return std::nullopt;
    for (auto kind : {ClauseKind::given, ClauseKind::when, ClauseKind::then}) {
      bool has = std::any_of(test.clauses.begin(), test.clauses.end(), [&](const Clause& c) { return c.kind == kind; });
      if (!has) {
        error(block.back().number, "test " + test.id + " has no '" + std::string(kClauseKinds.to_string(kind)) +
                                       "' clause");
        ok = false;
      }
    }
    if (!seen_.insert(test.id).second) {
      error(header_line, "duplicate test id " + test.id);
      ok = false;
    }
    if (!ok) return std::nullopt;
    return test;
  }

 private:
  // Returns (kind or nullopt for And, text).
  static std::optional<std::pair<std::optional<ClauseKind>, std::string_view>> classify(std::string_view line) {
    static constexpr std::pair<std::string_view, std::optional<ClauseKind>> kKeywords[] = {
        {"Given", ClauseKind::given}, {"When", ClauseKind::when}, {"Then", ClauseKind::then}, {"And", std::nullopt}};
    for (const auto& [kw, kind] : kKeywords) {
      if (line == kw) return std::pair{kind, std::string_view{}};
      if (auto body = keyword_text(line, kw)) return std::pair{kind, *body};
    }
    return std::nullopt;
  }

  void error(std::size_t line, std::string message) { errors_.push_back({line, std::move(message)}); }

  std::vector<ParseError>& errors_;
  std::set<std::string>& seen_;
};

}  // namespace detail

// Total function: never throws on any input, every error carries a 1-based line.
inline ParseResult parse_gwt(std::string_view text, std::string path = {}) {
  ParseResult result;
  result.file.path = std::move(path);
  auto lines = detail::split_lines(text);

  std::vector<std::vector<detail::Line>> blocks;
  std::vector<detail::Line> current;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = detail::trim(lines[i]);
    if (!line.empty() && line.front() == '#' && lines[i].front() == '#') continue;
    if (line.empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back({i + 1, line});
  }
  if (!current.empty()) blocks.push_back(std::move(current));

  if (blocks.empty()) {
    result.errors.push_back({1, "expected at least one test block"});
    return result;
  }

  std::set<std::string> seen;
  detail::BlockParser parser(result.errors, seen);
  for (const auto& block : blocks) {
    if (auto test = parser.parse(block)) result.file.tests.push_back(std::move(*test));
  }
  return result;
}

// Canonical text: fixed header order, one clause per line, repeated kinds as
// `And`, one blank line between tests, trailing newline.
inline std::string render_gwt(const GwtFile& file) {
  std::string out;
  bool first = true;
  for (const auto& test : file.tests) {
    if (!first) out += '\n';
    first = false;
    out += "test: " + test.id + "\n";
    out += "story: " + test.story_ref + "\n";
    out += "name: " + test.name + "\n";
    std::optional<ClauseKind> previous;
    for (const auto& clause : test.clauses) {
      std::string_view keyword;
      if (previous == clause.kind) {
        keyword = "And";
      } else {
        switch (clause.kind) {
          case ClauseKind::given: keyword = "Given"; break;
          case ClauseKind::when: keyword = "When"; break;
          case ClauseKind::then: keyword = "Then"; break;
        }
      }
      out += std::string(keyword) + " " + clause.text + "\n";
      previous = clause.kind;
    }
  }
  return out;
}

inline constexpr std::size_t kMaxNameLength = 120;

namespace detail {

inline bool contains_word_and(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::size_t pos = 0;
  while ((pos = lower.find("and", pos)) != std::string::npos) {
    bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
    bool right = pos + 3 >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[pos + 3]));
    if (left && right) return true;
    pos += 3;
  }
  return false;
}

}  // namespace detail

inline std::vector<LintWarning> lint_test(const AcceptanceTest& test) {
  std::vector<LintWarning> out;
  auto whens = std::count_if(test.clauses.begin(), test.clauses.end(),
                             [](const Clause& c) { return c.kind == ClauseKind::when; });
  if (whens > 1) out.push_back({test.id, "multiple-when", std::to_string(whens) + " When clauses; split the test"});
  for (const auto& c : test.clauses) {
    if (c.kind == ClauseKind::then && detail::contains_word_and(c.text))
      out.push_back({test.id, "then-conjunction", "Then clause joins outcomes with 'and'; use an And line: " + c.text});
  }
  if (test.name.size() > kMaxNameLength)
    out.push_back({test.id, "long-name", "name is " + std::to_string(test.name.size()) + " characters"});
  std::set<std::string_view> texts;
  for (const auto& c : test.clauses) {
    if (!texts.insert(c.text).second) out.push_back({test.id, "duplicate-clause", "repeated clause: " + c.text});
  }
  return out;
}

inline std::vector<LintWarning> lint_gwt(const GwtFile& file) {
  std::vector<LintWarning> out;
  for (const auto& test : file.tests) {
    auto w = lint_test(test);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

}  // namespace shiftup::gwt
