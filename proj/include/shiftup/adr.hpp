#pragma once

// Architecture decision records stored as markdown with a front-matter block:
//
//   ---
//   id: ADR-0001
//   title: Use PostgreSQL for persistence
//   status: accepted
//   date: 2025-11-03
//   supersedes: ADR-0000        (optional)
//   ---
//
//   ## Context
//   ...
//   ## Decision
//   ...
//   ## Consequences
//   ...

#include <cctype>
#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include "artifacts.hpp"
#include "gwt.hpp"

namespace shiftup::adr {

struct ParseError {
  std::size_t line = 0;
  std::string message;
};

inline std::string slug(std::string_view title) {
  std::string out;
  bool dash = false;
  for (unsigned char c : title) {
    if (std::isalnum(c)) {
      if (dash && !out.empty()) out += '-';
      out += static_cast<char>(std::tolower(c));
      dash = false;
    } else {
      dash = true;
    }
  }
  return out.empty() ? "record" : out;
}

inline std::string file_name(const ADRecord& r) { return r.id + "-" + slug(r.title) + ".md"; }

inline bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  int y = std::stoi(std::string(s.substr(0, 4)));
  unsigned m = static_cast<unsigned>(std::stoi(std::string(s.substr(5, 2))));
  unsigned d = static_cast<unsigned>(std::stoi(std::string(s.substr(8, 2))));
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

inline std::string render(const ADRecord& r) {
  std::string out = "---\n";
  out += "id: " + r.id + "\n";
  out += "title: " + r.title + "\n";
  out += "status: " + std::string(kAdrStatuses.to_string(r.status)) + "\n";
  out += "date: " + r.date + "\n";
  if (r.supersedes) out += "supersedes: " + *r.supersedes + "\n";
  out += "---\n\n## Context\n\n" + r.context + "\n\n## Decision\n\n" + r.decision + "\n\n## Consequences\n\n" +
         r.consequences + "\n";
  return out;
}

struct ParseResult {
  ADRecord record;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
};

inline ParseResult parse(std::string_view text) {
  ParseResult result;
  auto lines = gwt::detail::split_lines(text);
  auto fail = [&](std::size_t line, std::string msg) { result.errors.push_back({line, std::move(msg)}); };

  if (lines.empty() || lines[0] != "---") {
    fail(1, "expected front-matter opening '---'");
    return result;
  }
  std::size_t i = 1;
  bool closed = false;
  bool has_id = false, has_title = false, has_status = false, has_date = false;
  for (; i < lines.size(); ++i) {
    if (lines[i] == "---") {
      closed = true;
      ++i;
      break;
    }
    auto colon = lines[i].find(':');
    if (colon == std::string_view::npos) {
      fail(i + 1, "expected 'key: value' in front matter");
      continue;
    }
    auto key = gwt::detail::trim(lines[i].substr(0, colon));
    auto value = std::string(gwt::detail::trim(lines[i].substr(colon + 1)));
    if (key == "id") {
      result.record.id = value;
      has_id = true;
    } else if (key == "title") {
      result.record.title = value;
      has_title = true;
    } else if (key == "status") {
      if (auto s = kAdrStatuses.parse(value)) {
        result.record.status = *s;
        has_status = true;
      } else {
        fail(i + 1, "unknown status '" + value + "'");
      }
    } else if (key == "date") {
      result.record.date = value;
      has_date = true;
    } else if (key == "supersedes") {
      result.record.supersedes = value;
    } else {
      fail(i + 1, "unknown front-matter key '" + std::string(key) + "'");
    }
  }
  if (!closed) {
    fail(lines.size(), "front matter is not closed with '---'");
    return result;
  }
  for (auto [present, key] : {std::pair{has_id, "id"}, {has_title, "title"}, {has_status, "status"}, {has_date, "date"}})
    if (!present) fail(1, std::string("missing front-matter key '") + key + "'");

  static constexpr std::string_view kSections[] = {"## Context", "## Decision", "## Consequences"};
  std::string* targets[] = {&result.record.context, &result.record.decision, &result.record.consequences};
  int section = -1;
  std::vector<std::string_view> body;
  auto flush = [&] {
    if (section < 0) return;
    while (!body.empty() && gwt::detail::trim(body.front()).empty()) body.erase(body.begin());
    while (!body.empty() && gwt::detail::trim(body.back()).empty()) body.pop_back();
    std::string joined;
    for (std::size_t k = 0; k < body.size(); ++k) {
      if (k) joined += '\n';
      joined += body[k];
    }
    *targets[section] = std::move(joined);
    body.clear();
  };
  for (; i < lines.size(); ++i) {
    if (lines[i].starts_with("## ")) {
      int expected = section + 1;
      if (expected > 2 || lines[i] != kSections[expected]) {
        fail(i + 1, "expected section '" + std::string(expected > 2 ? "end of file" : kSections[expected]) + "'");
        return result;
      }
      flush();
      section = expected;
      continue;
    }
    if (section < 0) {
      if (!gwt::detail::trim(lines[i]).empty()) fail(i + 1, "text before '## Context'");
      continue;
    }
    body.push_back(lines[i]);
  }
  flush();
  if (section < 2) fail(lines.size(), "missing section '" + std::string(kSections[section + 1]) + "'");
  return result;
}

}  // namespace shiftup::adr
