#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bundle.hpp"
#include "ids.hpp"

namespace shiftup {

enum class EdgeKind { covers, constrains, contains, depends_on };
inline constexpr EnumNames<EdgeKind, 4> kEdgeKinds{{{{EdgeKind::covers, "covers"},
                                                     {EdgeKind::constrains, "constrains"},
                                                     {EdgeKind::contains, "contains"},
                                                     {EdgeKind::depends_on, "depends_on"}}}};

struct Edge {
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::covers;
  bool operator==(const Edge&) const = default;
};

struct EdgeLess {
  bool operator()(const Edge& a, const Edge& b) const {
    if (a.from != b.from) return id_less(a.from, b.from);
    if (a.to != b.to) return id_less(a.to, b.to);
    return a.kind < b.kind;
  }
};

class UnknownArtifact : public std::out_of_range {
 public:
  explicit UnknownArtifact(const std::string& id) : std::out_of_range("unknown artifact id " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class DependencyCycle : public std::runtime_error {
 public:
  explicit DependencyCycle(std::vector<std::string> members)
      : std::runtime_error("phase dependency cycle: " + join(members)), members_(std::move(members)) {}
  const std::vector<std::string>& members() const { return members_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  }
  std::vector<std::string> members_;
};

// Directed traceability graph. Edges point from the dependent artifact to what it
// relies on: story covers requirement, test covers story, issue constrains test,
// phase contains issue/test, phase depends_on phase.
class TraceGraph {
 public:
  void add_node(const std::string& id, ArtifactType type) { nodes_.emplace(id, type); }

  void add_edge(Edge e) {
    if (!nodes_.count(e.from)) throw UnknownArtifact(e.from);
    if (!nodes_.count(e.to)) throw UnknownArtifact(e.to);
    edges_.insert(std::move(e));
  }

  bool remove_edge(const Edge& e) { return edges_.erase(e) > 0; }

  const std::map<std::string, ArtifactType, IdLess>& nodes() const { return nodes_; }
  const std::set<Edge, EdgeLess>& edges() const { return edges_; }
  bool contains(std::string_view id) const { return nodes_.find(id) != nodes_.end(); }

  std::vector<std::string> nodes_of(ArtifactType t) const {
    std::vector<std::string> out;
    for (const auto& [id, type] : nodes_)
      if (type == t) out.push_back(id);
    return out;
  }

  std::size_t count_edges(EdgeKind k) const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [k](const Edge& e) { return e.kind == k; }));
  }

  bool operator==(const TraceGraph&) const = default;

 private:
  std::map<std::string, ArtifactType, IdLess> nodes_;
  std::set<Edge, EdgeLess> edges_;
};

inline TraceGraph build_graph(const ArtifactBundle& b) {
  TraceGraph g;
  for (const auto& r : b.requirements) g.add_node(r.id, ArtifactType::requirement);
  for (const auto& s : b.stories) g.add_node(s.id, ArtifactType::story);
  for (const auto& t : b.tests) g.add_node(t.id, ArtifactType::test);
  for (const auto& p : b.phases) g.add_node(p.id, ArtifactType::phase);
  for (const auto& i : b.issues) g.add_node(i.id, ArtifactType::issue);

  for (const auto& s : b.stories)
    for (const auto& r : s.requirement_refs) g.add_edge({s.id, r, EdgeKind::covers});
  for (const auto& t : b.tests) g.add_edge({t.id, t.story_ref, EdgeKind::covers});
  for (const auto& i : b.issues) {
    for (const auto& t : i.constraint_test_ids) g.add_edge({i.id, t, EdgeKind::constrains});
    g.add_edge({i.phase_ref, i.id, EdgeKind::contains});
  }
  for (const auto& p : b.phases) {
    for (const auto& t : p.test_ids) g.add_edge({p.id, t, EdgeKind::contains});
    for (const auto& d : p.depends_on) g.add_edge({p.id, d, EdgeKind::depends_on});
  }
  return g;
}

namespace detail {

// Phases lying on some depends_on cycle (strongly connected components of size > 1
// or with a self loop), in natural id order.
inline std::vector<std::string> cycle_members(const std::vector<std::string>& phases,
                                              const std::map<std::string, std::vector<std::string>>& deps) {
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::set<std::string, IdLess> members;
  int counter = 0;

  std::function<void(const std::string&)> connect = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    auto it = deps.find(v);
    if (it != deps.end()) {
      for (const auto& w : it->second) {
        if (!index.count(w)) {
          connect(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack.count(w)) {
          low[v] = std::min(low[v], index[w]);
        }
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> scc;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        scc.push_back(w);
      } while (w != v);
      bool self_loop = it != deps.end() && std::find(it->second.begin(), it->second.end(), v) != it->second.end();
      if (scc.size() > 1 || self_loop) members.insert(scc.begin(), scc.end());
    }
  };
  for (const auto& p : phases)
    if (!index.count(p)) connect(p);
  return {members.begin(), members.end()};
}

}  // namespace detail

// Topological order of phases (dependencies first); ties go to the lowest id.
inline std::vector<std::string> phase_order(const TraceGraph& g) {
  auto phases = g.nodes_of(ArtifactType::phase);
  std::map<std::string, std::vector<std::string>> deps;
  std::map<std::string, std::vector<std::string>> dependents;
  std::map<std::string, std::size_t> pending;
  for (const auto& p : phases) pending[p] = 0;
  for (const auto& e : g.edges()) {
    if (e.kind != EdgeKind::depends_on) continue;
    deps[e.from].push_back(e.to);
    dependents[e.to].push_back(e.from);
    ++pending[e.from];
  }

  auto greater = [](const std::string& a, const std::string& b) { return id_less(b, a); };
  std::priority_queue<std::string, std::vector<std::string>, decltype(greater)> ready(greater);
  for (const auto& [p, n] : pending)
    if (n == 0) ready.push(p);

  std::vector<std::string> order;
  while (!ready.empty()) {
    auto p = ready.top();
    ready.pop();
    order.push_back(p);
    for (const auto& d : dependents[p])
      if (--pending[d] == 0) ready.push(d);
  }
  if (order.size() != phases.size()) throw DependencyCycle(detail::cycle_members(phases, deps));
  return order;
}

struct CoverageReport {
  std::vector<std::string> uncovered_stories;
  std::vector<std::string> uncovered_requirements;
  std::vector<std::string> unconstrained_tests;
  std::vector<std::string> unphased_tests;
  std::vector<std::string> multi_phase_tests;
  double story_coverage = 1.0;
  double requirement_coverage = 1.0;
  double test_constraint_coverage = 1.0;
  double test_phase_coverage = 1.0;

  bool fully_linked() const {
    return uncovered_stories.empty() && uncovered_requirements.empty() && unconstrained_tests.empty() &&
           unphased_tests.empty();
  }
};

inline CoverageReport coverage_report(const TraceGraph& g) {
  std::map<std::string, std::size_t> covered_by, constrained_by, phased_by;
  for (const auto& e : g.edges()) {
    auto to_type = g.nodes().at(e.to);
    if (e.kind == EdgeKind::covers) ++covered_by[e.to];
    if (e.kind == EdgeKind::constrains) ++constrained_by[e.to];
    if (e.kind == EdgeKind::contains && to_type == ArtifactType::test) ++phased_by[e.to];
  }

  CoverageReport r;
  auto gaps = [](const std::vector<std::string>& ids, const std::map<std::string, std::size_t>& hits,
                 std::vector<std::string>& out) {
    for (const auto& id : ids)
      if (!hits.count(id)) out.push_back(id);
    return ids.empty() ? 1.0 : static_cast<double>(ids.size() - out.size()) / static_cast<double>(ids.size());
  };
  auto stories = g.nodes_of(ArtifactType::story);
  auto reqs = g.nodes_of(ArtifactType::requirement);
  auto tests = g.nodes_of(ArtifactType::test);
  r.story_coverage = gaps(stories, covered_by, r.uncovered_stories);
  r.requirement_coverage = gaps(reqs, covered_by, r.uncovered_requirements);
  r.test_constraint_coverage = gaps(tests, constrained_by, r.unconstrained_tests);
  r.test_phase_coverage = gaps(tests, phased_by, r.unphased_tests);
  for (const auto& t : tests) {
    auto it = phased_by.find(t);
    if (it != phased_by.end() && it->second > 1) r.multi_phase_tests.push_back(t);
  }
  return r;
}

// Everything that transitively relies on `id` (reverse reachability), excluding `id`.
inline std::set<std::string, IdLess> impact_of(const TraceGraph& g, const std::string& id) {
  if (!g.contains(id)) throw UnknownArtifact(id);
  std::map<std::string, std::vector<std::string>> reverse;
  for (const auto& e : g.edges()) reverse[e.to].push_back(e.from);

  std::set<std::string, IdLess> seen{id};
  std::deque<std::string> frontier{id};
  while (!frontier.empty()) {
    auto v = frontier.front();
    frontier.pop_front();
    for (const auto& u : reverse[v])
      if (seen.insert(u).second) frontier.push_back(u);
  }
  seen.erase(id);
  return seen;
}

inline Json to_json(const TraceGraph& g) {
  Json nodes = Json::array();
  for (const auto& [id, type] : g.nodes()) nodes.push_back({{"id", id}, {"type", type_name(type)}});
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", kEdgeKinds.to_string(e.kind)}});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline std::string to_dot(const TraceGraph& g) {
  auto shape = [](ArtifactType t) -> std::string_view {
    switch (t) {
      case ArtifactType::requirement: return "note";
      case ArtifactType::story: return "ellipse";
      case ArtifactType::test: return "box";
      case ArtifactType::issue: return "hexagon";
      case ArtifactType::phase: return "folder";
      default: return "plaintext";
    }
  };
  std::string out = "digraph trace {\n  rankdir=LR;\n";
  for (const auto& [id, type] : g.nodes())
    out += "  \"" + id + "\" [shape=" + std::string(shape(type)) + "];\n";
  for (const auto& e : g.edges())
    out += "  \"" + e.from + "\" -> \"" + e.to + "\" [label=\"" + std::string(kEdgeKinds.to_string(e.kind)) + "\"];\n";
  out += "}\n";
  return out;
}

inline Json to_json(const CoverageReport& r) {
  return {{"uncovered_stories", r.uncovered_stories},
          {"uncovered_requirements", r.uncovered_requirements},
          {"unconstrained_tests", r.unconstrained_tests},
          {"unphased_tests", r.unphased_tests},
          {"multi_phase_tests", r.multi_phase_tests},
          {"ratios",
           {{"story_coverage", r.story_coverage},
            {"requirement_coverage", r.requirement_coverage},
            {"test_constraint_coverage", r.test_constraint_coverage},
            {"test_phase_coverage", r.test_phase_coverage}}}};
}

}  // namespace shiftup
