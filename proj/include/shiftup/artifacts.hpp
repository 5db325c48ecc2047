#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace shiftup {

using Json = nlohmann::json;

// Thrown when an enum or field value read from disk or the wire is not recognised.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Table-driven enum <-> text mapping shared by every enum in the artifact model.
template <typename E, std::size_t N>
struct EnumNames {
  std::array<std::pair<E, std::string_view>, N> entries;

  constexpr std::string_view to_string(E e) const {
    for (const auto& [v, s] : entries)
      if (v == e) return s;
    return "?";
  }
  std::optional<E> parse(std::string_view s) const {
    for (const auto& [v, name] : entries)
      if (name == s) return v;
    return std::nullopt;
  }
  E parse_or_throw(std::string_view s, std::string_view what) const {
    if (auto v = parse(s)) return *v;
    throw FormatError(std::string("invalid ") + std::string(what) + " '" + std::string(s) + "'");
  }
};

enum class RequirementKind { functional, non_functional };
inline constexpr EnumNames<RequirementKind, 2> kRequirementKinds{
    {{{RequirementKind::functional, "functional"}, {RequirementKind::non_functional, "non_functional"}}}};

enum class ClauseKind { given, when, then };
inline constexpr EnumNames<ClauseKind, 3> kClauseKinds{
    {{{ClauseKind::given, "given"}, {ClauseKind::when, "when"}, {ClauseKind::then, "then"}}}};

enum class C4Level { context, container, component, code };
inline constexpr EnumNames<C4Level, 4> kC4Levels{{{{C4Level::context, "context"},
                                                   {C4Level::container, "container"},
                                                   {C4Level::component, "component"},
                                                   {C4Level::code, "code"}}}};

enum class AdrStatus { proposed, accepted, deprecated, superseded };
inline constexpr EnumNames<AdrStatus, 4> kAdrStatuses{{{{AdrStatus::proposed, "proposed"},
                                                        {AdrStatus::accepted, "accepted"},
                                                        {AdrStatus::deprecated, "deprecated"},
                                                        {AdrStatus::superseded, "superseded"}}}};

enum class IssueStatus { open, in_progress, closed };
inline constexpr EnumNames<IssueStatus, 3> kIssueStatuses{
    {{{IssueStatus::open, "open"}, {IssueStatus::in_progress, "in_progress"}, {IssueStatus::closed, "closed"}}}};

struct Requirement {
  std::string id;
  std::string text;
  RequirementKind kind = RequirementKind::functional;
  bool operator==(const Requirement&) const = default;
};

struct UserStory {
  std::string id;
  std::string as_a;
  std::string i_want;
  std::string so_that;
  std::vector<std::string> requirement_refs;
  bool operator==(const UserStory&) const = default;
};

struct Clause {
  ClauseKind kind = ClauseKind::given;
  std::string text;
  bool operator==(const Clause&) const = default;
};

struct AcceptanceTest {
  std::string id;
  std::string story_ref;
  std::string name;
  std::vector<Clause> clauses;
  // .gwt file (relative to tests/) the test lives in.
  std::string file = "acceptance.gwt";
  bool operator==(const AcceptanceTest&) const = default;
};

struct C4Element {
  std::string id;
  std::string name;
  C4Level level = C4Level::context;
  std::optional<std::string> parent;
  std::string description;
  bool operator==(const C4Element&) const = default;
};

struct C4Relation {
  std::string from;
  std::string to;
  std::string label;
  bool operator==(const C4Relation&) const = default;
};

struct PathMapping {
  std::string path_prefix;
  std::string element_id;
  bool operator==(const PathMapping&) const = default;
};

struct C4Model {
  std::vector<C4Element> elements;
  std::vector<C4Relation> relations;
  std::vector<PathMapping> path_mappings;
  bool operator==(const C4Model&) const = default;
};

struct ADRecord {
  std::string id;
  std::string title;
  AdrStatus status = AdrStatus::proposed;
  std::string date;
  std::string context;
  std::string decision;
  std::string consequences;
  std::optional<std::string> supersedes;
  bool operator==(const ADRecord&) const = default;
};

struct RoadmapPhase {
  std::string id;
  std::string name;
  std::string goal;
  std::vector<std::string> architecture_tasks;
  std::vector<std::string> test_ids;
  std::vector<std::string> depends_on;
  bool operator==(const RoadmapPhase&) const = default;
};

struct WorkIssue {
  std::string id;
  std::string phase_ref;
  std::string title;
  std::string description;
  std::vector<std::string> constraint_test_ids;
  std::vector<std::string> context_links;
  IssueStatus status = IssueStatus::open;
  bool operator==(const WorkIssue&) const = default;
};

// One broken invariant. `line` is 1-based, 0 when not tied to a line.
struct Violation {
  std::string artifact;
  std::string rule;
  std::string detail;
  std::string file;
  std::size_t line = 0;
  bool operator==(const Violation&) const = default;
};

inline std::string to_string(const Violation& v) {
  std::string out;
  if (!v.file.empty()) {
    out += v.file;
    if (v.line) out += ":" + std::to_string(v.line);
    out += ": ";
  }
  out += "[" + v.rule + "] ";
  if (!v.artifact.empty()) out += v.artifact + ": ";
  out += v.detail;
  return out;
}

inline Json to_json(const Violation& v) {
  Json j{{"artifact", v.artifact}, {"rule", v.rule}, {"detail", v.detail}};
  if (!v.file.empty()) j["file"] = v.file;
  if (v.line) j["line"] = v.line;
  return j;
}

// JSON mapping. Field names match the on-disk schema.

namespace detail {

template <typename T>
T required(const Json& j, std::string_view key) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError("missing field '" + std::string(key) + "'");
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw FormatError("field '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const Json& j, std::string_view key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw FormatError("field '" + std::string(key) + "' has the wrong type");
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  if (!j.is_object()) throw FormatError(std::string(where) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw FormatError("unknown key '" + k + "' in " + std::string(where));
  }
}

}  // namespace detail

inline Json to_json(const Requirement& r) {
  return {{"id", r.id}, {"kind", kRequirementKinds.to_string(r.kind)}, {"text", r.text}};
}
inline Requirement requirement_from_json(const Json& j) {
  detail::reject_unknown(j, {"id", "kind", "text"}, "requirement");
  return {detail::required<std::string>(j, "id"), detail::required<std::string>(j, "text"),
          kRequirementKinds.parse_or_throw(detail::required<std::string>(j, "kind"), "requirement kind")};
}

inline Json to_json(const UserStory& s) {
  return {{"id", s.id}, {"as_a", s.as_a}, {"i_want", s.i_want}, {"so_that", s.so_that},
          {"requirement_refs", s.requirement_refs}};
}
inline UserStory story_from_json(const Json& j) {
  detail::reject_unknown(j, {"id", "as_a", "i_want", "so_that", "requirement_refs"}, "story");
  return {detail::required<std::string>(j, "id"), detail::required<std::string>(j, "as_a"),
          detail::required<std::string>(j, "i_want"), detail::required<std::string>(j, "so_that"),
          detail::required<std::vector<std::string>>(j, "requirement_refs")};
}

inline Json to_json(const C4Model& m) {
  Json elements = Json::array();
  for (const auto& e : m.elements) {
    Json je{{"id", e.id}, {"name", e.name}, {"level", kC4Levels.to_string(e.level)}, {"description", e.description}};
    if (e.parent) je["parent"] = *e.parent;
    elements.push_back(std::move(je));
  }
  Json relations = Json::array();
  for (const auto& r : m.relations) relations.push_back({{"from", r.from}, {"to", r.to}, {"label", r.label}});
  Json mappings = Json::array();
  for (const auto& p : m.path_mappings)
    mappings.push_back({{"path_prefix", p.path_prefix}, {"element_id", p.element_id}});
  return {{"elements", elements}, {"relations", relations}, {"path_mappings", mappings}};
}

inline C4Model c4_from_json(const Json& j) {
  detail::reject_unknown(j, {"elements", "relations", "path_mappings"}, "c4 model");
  C4Model m;
  for (const auto& je : detail::required<Json>(j, "elements")) {
    detail::reject_unknown(je, {"id", "name", "level", "parent", "description"}, "c4 element");
    m.elements.push_back({detail::required<std::string>(je, "id"), detail::required<std::string>(je, "name"),
                          kC4Levels.parse_or_throw(detail::required<std::string>(je, "level"), "c4 level"),
                          detail::optional_field<std::string>(je, "parent"),
                          detail::required<std::string>(je, "description")});
  }
  for (const auto& jr : detail::required<Json>(j, "relations")) {
    detail::reject_unknown(jr, {"from", "to", "label"}, "c4 relation");
    m.relations.push_back({detail::required<std::string>(jr, "from"), detail::required<std::string>(jr, "to"),
                           detail::required<std::string>(jr, "label")});
  }
  for (const auto& jp : detail::required<Json>(j, "path_mappings")) {
    detail::reject_unknown(jp, {"path_prefix", "element_id"}, "path mapping");
    m.path_mappings.push_back(
        {detail::required<std::string>(jp, "path_prefix"), detail::required<std::string>(jp, "element_id")});
  }
  return m;
}

inline Json to_json(const RoadmapPhase& p) {
  return {{"id", p.id},
          {"name", p.name},
          {"goal", p.goal},
          {"architecture_tasks", p.architecture_tasks},
          {"test_ids", p.test_ids},
          {"depends_on", p.depends_on}};
}
inline RoadmapPhase phase_from_json(const Json& j) {
  detail::reject_unknown(j, {"id", "name", "goal", "architecture_tasks", "test_ids", "depends_on"}, "phase");
  return {detail::required<std::string>(j, "id"),
          detail::required<std::string>(j, "name"),
          detail::required<std::string>(j, "goal"),
          detail::required<std::vector<std::string>>(j, "architecture_tasks"),
          detail::required<std::vector<std::string>>(j, "test_ids"),
          detail::required<std::vector<std::string>>(j, "depends_on")};
}

inline Json to_json(const WorkIssue& i) {
  return {{"id", i.id},
          {"phase_ref", i.phase_ref},
          {"title", i.title},
          {"description", i.description},
          {"constraint_test_ids", i.constraint_test_ids},
          {"context_links", i.context_links},
          {"status", kIssueStatuses.to_string(i.status)}};
}
inline WorkIssue issue_from_json(const Json& j) {
  detail::reject_unknown(
      j, {"id", "phase_ref", "title", "description", "constraint_test_ids", "context_links", "status"}, "issue");
  return {detail::required<std::string>(j, "id"),
          detail::required<std::string>(j, "phase_ref"),
          detail::required<std::string>(j, "title"),
          detail::required<std::string>(j, "description"),
          detail::required<std::vector<std::string>>(j, "constraint_test_ids"),
          detail::required<std::vector<std::string>>(j, "context_links"),
          kIssueStatuses.parse_or_throw(detail::required<std::string>(j, "status"), "issue status")};
}

}  // namespace shiftup
