#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adr.hpp"
#include "artifacts.hpp"
#include "config.hpp"
#include "gwt.hpp"
#include "ids.hpp"

namespace shiftup {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "shiftup.json";

// The on-disk guardrail project. Issues and ADRs are kept in natural id order,
// tests in (file, position) order.
struct ArtifactBundle {
  fs::path root;
  ProjectConfig config;
  std::vector<Requirement> requirements;
  std::vector<UserStory> stories;
  std::vector<AcceptanceTest> tests;
  C4Model c4;
  std::vector<ADRecord> adrs;
  std::vector<RoadmapPhase> phases;
  std::vector<WorkIssue> issues;

  // Field-by-field equality; the root directory is not part of the content.
  bool operator==(const ArtifactBundle& o) const {
    return config == o.config && requirements == o.requirements && stories == o.stories && tests == o.tests &&
           c4 == o.c4 && adrs == o.adrs && phases == o.phases && issues == o.issues;
  }

  template <typename T>
  static const T* find_in(const std::vector<T>& items, std::string_view id) {
    auto it = std::find_if(items.begin(), items.end(), [&](const T& x) { return x.id == id; });
    return it == items.end() ? nullptr : &*it;
  }
  const AcceptanceTest* find_test(std::string_view id) const { return find_in(tests, id); }
  const UserStory* find_story(std::string_view id) const { return find_in(stories, id); }
  const RoadmapPhase* find_phase(std::string_view id) const { return find_in(phases, id); }
  const WorkIssue* find_issue(std::string_view id) const { return find_in(issues, id); }
  WorkIssue* find_issue(std::string_view id) {
    auto it = std::find_if(issues.begin(), issues.end(), [&](const WorkIssue& x) { return x.id == id; });
    return it == issues.end() ? nullptr : &*it;
  }
};

// Canonical JSON text: 2-space indent, sorted keys, UTF-8, trailing newline.
inline std::string canonical_json(const Json& j) { return j.dump(2, ' ', false) + "\n"; }

namespace detail {

inline std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::string rel(const fs::path& root, const fs::path& p) { return p.lexically_relative(root).generic_string(); }

inline std::vector<fs::path> sorted_files(const fs::path& dir, std::string_view ext) {
  std::vector<fs::path> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Parses a JSON file; malformed content becomes a violation with file and line.
inline std::optional<Json> load_json(const fs::path& root, const fs::path& p, std::vector<Violation>& errors) {
  auto text = read_file(p);
  if (!text) {
    errors.push_back({"", "io-error", "cannot read file", rel(root, p), 0});
    return std::nullopt;
  }
  try {
    return Json::parse(*text);
  } catch (const Json::parse_error& e) {
    errors.push_back({"", "malformed-file", e.what(), rel(root, p), line_of_offset(*text, e.byte ? e.byte - 1 : 0)});
    return std::nullopt;
  }
}

template <typename T, typename F>
void load_array(const fs::path& root, const fs::path& p, std::string_view key, F&& from_json, std::vector<T>& out,
                std::vector<Violation>& errors) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return;
  auto j = load_json(root, p, errors);
  if (!j) return;
  auto arr = j->find(key);
  if (!j->is_object() || arr == j->end() || !arr->is_array() || j->size() != 1) {
    errors.push_back({"", "malformed-file", "expected an object with a single '" + std::string(key) + "' array",
                      rel(root, p), 1});
    return;
  }
  for (std::size_t i = 0; i < arr->size(); ++i) {
    try {
      out.push_back(from_json((*arr)[i]));
    } catch (const FormatError& e) {
      std::string id = (*arr)[i].is_object() && (*arr)[i].contains("id") && (*arr)[i]["id"].is_string()
                           ? (*arr)[i]["id"].template get<std::string>()
                           : "";
      errors.push_back({id, "malformed-file", std::string(key) + "[" + std::to_string(i) + "]: " + e.what(),
                        rel(root, p), 0});
    }
  }
}

}  // namespace detail

// Type invariants over an in-memory bundle. Empty iff the bundle is valid.
inline std::vector<Violation> validate(const ArtifactBundle& b) {
  std::vector<Violation> out;
  auto add = [&](std::string artifact, std::string rule, std::string detail) {
    out.push_back({std::move(artifact), std::move(rule), std::move(detail), "", 0});
  };

  auto check_ids = [&](const auto& items, ArtifactType type) {
    std::set<std::string> seen;
    for (const auto& x : items) {
      if (!is_valid_id(x.id, type))
        add(x.id, "id-pattern", "expected " + std::string(prefix_of(type)) + "-<n> id");
      if (!seen.insert(x.id).second) add(x.id, "duplicate-id", "id defined more than once");
    }
    return seen;
  };
  auto req_ids = check_ids(b.requirements, ArtifactType::requirement);
  auto story_ids = check_ids(b.stories, ArtifactType::story);
  auto test_ids = check_ids(b.tests, ArtifactType::test);
  auto adr_ids = check_ids(b.adrs, ArtifactType::adr);
  auto phase_ids = check_ids(b.phases, ArtifactType::phase);
  check_ids(b.issues, ArtifactType::issue);

  auto dangling = [&](const std::string& from, const std::string& to) {
    add(from, "dangling-reference", from + " -> " + to);
  };
  auto single_line = [](std::string_view s) {
    return !s.empty() && s.find('\n') == std::string_view::npos && s.find('\r') == std::string_view::npos &&
           gwt::detail::trim(s).size() == s.size();
  };

  for (const auto& r : b.requirements)
    if (r.text.empty()) add(r.id, "empty-field", "requirement text is empty");

  for (const auto& s : b.stories) {
    if (s.as_a.empty() || s.i_want.empty() || s.so_that.empty())
      add(s.id, "empty-field", "story template slots must be non-empty");
    for (const auto& ref : s.requirement_refs)
      if (!req_ids.count(ref)) dangling(s.id, ref);
  }

  for (const auto& t : b.tests) {
    if (!story_ids.count(t.story_ref)) dangling(t.id, t.story_ref);
    bool canonical = single_line(t.name) && t.name.front() != '#';
    for (const auto& c : t.clauses) canonical = canonical && single_line(c.text);
    if (!canonical) add(t.id, "test-text", "name and clause texts must be single-line, trimmed and non-empty");
    if (t.file.empty() || t.file.find('/') != std::string::npos || !t.file.ends_with(".gwt"))
      add(t.id, "test-file", "test file must be a plain '<name>.gwt'");
    bool kinds[3] = {false, false, false};
    bool ordered = true;
    for (std::size_t i = 0; i < t.clauses.size(); ++i) {
      kinds[static_cast<int>(t.clauses[i].kind)] = true;
      if (i && t.clauses[i].kind < t.clauses[i - 1].kind) ordered = false;
    }
    if (!(kinds[0] && kinds[1] && kinds[2])) add(t.id, "test-clauses", "needs at least one given, when and then");
    if (!ordered) add(t.id, "test-clause-order", "clauses must follow given, when, then order");
  }

  std::set<std::string> element_ids;
  std::map<std::string, C4Level> levels;
  for (const auto& e : b.c4.elements) {
    if (e.id.empty() || !element_ids.insert(e.id).second) add(e.id, "duplicate-id", "c4 element id reused or empty");
    levels[e.id] = e.level;
  }
  for (const auto& e : b.c4.elements) {
    if (!e.parent) {
      if (e.level != C4Level::context) add(e.id, "c4-level-order", "non-context element needs a parent");
      continue;
    }
    auto it = levels.find(*e.parent);
    if (it == levels.end()) {
      dangling(e.id, *e.parent);
    } else if (static_cast<int>(it->second) + 1 != static_cast<int>(e.level)) {
      add(e.id, "c4-level-order",
          std::string(kC4Levels.to_string(e.level)) + " cannot sit under " + std::string(kC4Levels.to_string(it->second)));
    }
  }
  for (const auto& r : b.c4.relations) {
    if (!element_ids.count(r.from)) dangling("c4:" + r.from + "->" + r.to, r.from);
    if (!element_ids.count(r.to)) dangling("c4:" + r.from + "->" + r.to, r.to);
  }
  std::set<std::string> prefixes;
  for (const auto& m : b.c4.path_mappings) {
    if (!prefixes.insert(m.path_prefix).second) add(m.path_prefix, "duplicate-path-prefix", "path prefix mapped twice");
    if (!element_ids.count(m.element_id)) dangling("path:" + m.path_prefix, m.element_id);
  }

  std::set<std::string> superseded_by_someone;
  for (const auto& a : b.adrs)
    if (a.supersedes) superseded_by_someone.insert(*a.supersedes);
  for (const auto& a : b.adrs) {
    if (a.title.empty() || a.context.empty() || a.decision.empty() || a.consequences.empty())
      add(a.id, "empty-field", "title, context, decision and consequences must be non-empty");
    auto body_ok = [](std::string_view s) {
      return s.find("\n## ") == std::string_view::npos && !s.starts_with("## ") &&
             gwt::detail::trim(s).size() == s.size() && s.find('\r') == std::string_view::npos &&
             (s.empty() || (s.front() != '\n' && s.back() != '\n'));
    };
    if ((!a.title.empty() && !single_line(a.title)) || !body_ok(a.context) || !body_ok(a.decision) || !body_ok(a.consequences))
      add(a.id, "adr-text", "title must be one trimmed line; sections must be trimmed and hold no '## ' lines");
    if (!adr::is_iso_date(a.date)) add(a.id, "adr-date", "date must be YYYY-MM-DD, got '" + a.date + "'");
    if (a.supersedes && (!adr_ids.count(*a.supersedes) || *a.supersedes == a.id)) dangling(a.id, *a.supersedes);
    if (a.status == AdrStatus::superseded && !superseded_by_someone.count(a.id))
      add(a.id, "adr-superseded-without-successor", "no record supersedes it");
  }

  std::map<std::string, std::set<std::string>> phase_tests;
  for (const auto& p : b.phases) {
    if (p.test_ids.empty()) add(p.id, "phase-without-tests", "phase lists no acceptance tests");
    for (const auto& t : p.test_ids)
      if (!test_ids.count(t)) dangling(p.id, t);
    for (const auto& d : p.depends_on) {
      if (d == p.id) add(p.id, "phase-self-dependency", "phase depends on itself");
      else if (!phase_ids.count(d)) dangling(p.id, d);
    }
    phase_tests[p.id].insert(p.test_ids.begin(), p.test_ids.end());
  }

  for (const auto& i : b.issues) {
    if (i.title.empty()) add(i.id, "empty-field", "issue title is empty");
    if (i.constraint_test_ids.empty()) add(i.id, "issue-without-constraints", "issue has no constraint tests");
    bool phase_known = phase_ids.count(i.phase_ref) > 0;
    if (!phase_known) dangling(i.id, i.phase_ref);
    std::vector<std::string> outside;
    for (const auto& t : i.constraint_test_ids) {
      if (!test_ids.count(t)) dangling(i.id, t);
      else if (phase_known && !phase_tests[i.phase_ref].count(t)) outside.push_back(t);
    }
    if (!outside.empty()) {
      std::string list;
      for (const auto& t : outside) list += (list.empty() ? "" : ", ") + t;
      add(i.id, "issue-constraint-outside-phase", "not in " + i.phase_ref + ": " + list);
    }
  }
  return out;
}

// Non-fatal findings: tests gated by no issue.
inline std::vector<Violation> warnings(const ArtifactBundle& b) {
  std::set<std::string> constrained;
  for (const auto& i : b.issues) constrained.insert(i.constraint_test_ids.begin(), i.constraint_test_ids.end());
  std::vector<Violation> out;
  for (const auto& t : b.tests)
    if (!constrained.count(t.id)) out.push_back({t.id, "test-unconstrained", "no issue constrains this test", "", 0});
  return out;
}

struct LoadResult {
  std::optional<ArtifactBundle> bundle;
  std::vector<Violation> errors;
  // True when the failure is environmental (missing manifest, unreadable root).
  bool io_failure = false;
  bool ok() const { return bundle.has_value(); }
};

// Reads every artifact family and reports all problems, never just the first.
inline LoadResult load_bundle(const fs::path& root) {
  LoadResult result;
  auto& errors = result.errors;
  std::error_code ec;
  if (!fs::is_regular_file(root / kManifestFile, ec)) {
    errors.push_back({"", "missing-manifest", "no " + std::string(kManifestFile) + " in " + root.string(), "", 0});
    result.io_failure = true;
    return result;
  }

  ArtifactBundle b;
  b.root = root;
  if (auto j = detail::load_json(root, root / kManifestFile, errors)) {
    try {
      b.config = config_from_json(*j);
    } catch (const FormatError& e) {
      errors.push_back({"", "malformed-file", e.what(), kManifestFile, 0});
    }
  }

  detail::load_array(root, root / "requirements" / "requirements.json", "requirements", requirement_from_json,
                     b.requirements, errors);
  detail::load_array(root, root / "stories" / "stories.json", "stories", story_from_json, b.stories, errors);
  detail::load_array(root, root / "roadmap" / "phases.json", "phases", phase_from_json, b.phases, errors);

  for (const auto& p : detail::sorted_files(root / "tests", ".gwt")) {
    auto text = detail::read_file(p);
    if (!text) {
      errors.push_back({"", "io-error", "cannot read file", detail::rel(root, p), 0});
      continue;
    }
    auto parsed = gwt::parse_gwt(*text, detail::rel(root, p));
    for (const auto& e : parsed.errors)
      errors.push_back({"", "malformed-file", e.message, detail::rel(root, p), e.line});
    for (auto& t : parsed.file.tests) {
      t.file = p.filename().string();
      b.tests.push_back(std::move(t));
    }
  }

  auto c4_path = root / "architecture" / "c4.json";
  if (fs::exists(c4_path, ec)) {
    if (auto j = detail::load_json(root, c4_path, errors)) {
      try {
        b.c4 = c4_from_json(*j);
      } catch (const FormatError& e) {
        errors.push_back({"", "malformed-file", e.what(), detail::rel(root, c4_path), 0});
      }
    }
  }

  for (const auto& p : detail::sorted_files(root / "architecture" / "adr", ".md")) {
    auto text = detail::read_file(p);
    if (!text) {
      errors.push_back({"", "io-error", "cannot read file", detail::rel(root, p), 0});
      continue;
    }
    auto parsed = adr::parse(*text);
    for (const auto& e : parsed.errors)
      errors.push_back({parsed.record.id, "malformed-file", e.message, detail::rel(root, p), e.line});
    if (parsed.ok()) b.adrs.push_back(std::move(parsed.record));
  }

  for (const auto& p : detail::sorted_files(root / "issues", ".json")) {
    auto j = detail::load_json(root, p, errors);
    if (!j) continue;
    try {
      b.issues.push_back(issue_from_json(*j));
    } catch (const FormatError& e) {
      errors.push_back({"", "malformed-file", e.what(), detail::rel(root, p), 0});
    }
  }

  std::stable_sort(b.issues.begin(), b.issues.end(), [](const auto& x, const auto& y) { return id_less(x.id, y.id); });
  std::stable_sort(b.adrs.begin(), b.adrs.end(), [](const auto& x, const auto& y) { return id_less(x.id, y.id); });

  auto violations = validate(b);
  errors.insert(errors.end(), violations.begin(), violations.end());
  if (errors.empty()) result.bundle = std::move(b);
  return result;
}

class SaveError : public std::runtime_error {
 public:
  SaveError(std::string what, std::vector<Violation> violations = {})
      : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

namespace detail {

inline void write_file(const fs::path& p, std::string_view content) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) throw SaveError("cannot create " + p.parent_path().string() + ": " + ec.message());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw SaveError("cannot write " + p.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw SaveError("write failed for " + p.string());
}

template <typename T>
Json array_of(const std::vector<T>& items) {
  Json arr = Json::array();
  for (const auto& x : items) arr.push_back(to_json(x));
  return arr;
}

}  // namespace detail

inline void save_issue(const WorkIssue& issue, const fs::path& root) {
  detail::write_file(root / "issues" / (issue.id + ".json"), canonical_json(to_json(issue)));
}

// Writes the bundle in canonical form. Stale artifact files in the target are removed
// so the directory holds exactly this bundle. Callers serialize saves per root.
inline void save_bundle(const ArtifactBundle& b, const fs::path& root) {
  if (auto v = validate(b); !v.empty()) throw SaveError("bundle is invalid", std::move(v));

  std::error_code ec;
  for (const auto& [dir, ext] : {std::pair{"tests", ".gwt"}, {"issues", ".json"}}) {
    for (const auto& p : detail::sorted_files(root / dir, ext)) fs::remove(p, ec);
  }
  for (const auto& p : detail::sorted_files(root / "architecture" / "adr", ".md")) fs::remove(p, ec);

  detail::write_file(root / kManifestFile, canonical_json(to_json(b.config)));
  detail::write_file(root / "requirements" / "requirements.json",
                     canonical_json({{"requirements", detail::array_of(b.requirements)}}));
  detail::write_file(root / "stories" / "stories.json", canonical_json({{"stories", detail::array_of(b.stories)}}));
  detail::write_file(root / "roadmap" / "phases.json", canonical_json({{"phases", detail::array_of(b.phases)}}));
  detail::write_file(root / "architecture" / "c4.json", canonical_json(to_json(b.c4)));

  std::map<std::string, gwt::GwtFile> files;
  for (const auto& t : b.tests) files[t.file].tests.push_back(t);
  for (const auto& [name, file] : files) detail::write_file(root / "tests" / name, gwt::render_gwt(file));

  for (const auto& a : b.adrs) detail::write_file(root / "architecture" / "adr" / adr::file_name(a), adr::render(a));
  for (const auto& i : b.issues) save_issue(i, root);
}

}  // namespace shiftup
