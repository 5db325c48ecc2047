#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

namespace shiftup {

// Artifact families, keyed by id prefix.
enum class ArtifactType { requirement, story, test, phase, issue, adr, unknown };

inline constexpr std::string_view prefix_of(ArtifactType t) {
  switch (t) {
    case ArtifactType::requirement: return "REQ";
    case ArtifactType::story: return "US";
    case ArtifactType::test: return "TC";
    case ArtifactType::phase: return "PH";
    case ArtifactType::issue: return "ISS";
    case ArtifactType::adr: return "ADR";
    case ArtifactType::unknown: break;
  }
  return "";
}

inline constexpr std::string_view type_name(ArtifactType t) {
  switch (t) {
    case ArtifactType::requirement: return "requirement";
    case ArtifactType::story: return "story";
    case ArtifactType::test: return "test";
    case ArtifactType::phase: return "phase";
    case ArtifactType::issue: return "issue";
    case ArtifactType::adr: return "adr";
    case ArtifactType::unknown: break;
  }
  return "unknown";
}

struct ParsedId {
  std::string_view prefix;
  std::uint64_t number = 0;
  std::size_t digits = 0;
};

// Splits `PREFIX-<digits>`; nullopt if the shape does not match.
inline std::optional<ParsedId> split_id(std::string_view id) {
  auto dash = id.rfind('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 >= id.size()) return std::nullopt;
  auto prefix = id.substr(0, dash);
  auto digits = id.substr(dash + 1);
  if (!std::all_of(prefix.begin(), prefix.end(), [](unsigned char c) { return std::isupper(c); }))
    return std::nullopt;
  ParsedId out{prefix, 0, digits.size()};
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out.number);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return out;
}

inline ArtifactType type_of(std::string_view id) {
  auto p = split_id(id);
  if (!p) return ArtifactType::unknown;
  for (auto t : {ArtifactType::requirement, ArtifactType::story, ArtifactType::test,
                 ArtifactType::phase, ArtifactType::issue, ArtifactType::adr}) {
    if (p->prefix == prefix_of(t)) return t;
  }
  return ArtifactType::unknown;
}

// True if `id` matches the fixed pattern for `t`. ADR ids carry exactly four digits.
inline bool is_valid_id(std::string_view id, ArtifactType t) {
  auto p = split_id(id);
  if (!p || p->prefix != prefix_of(t)) return false;
  if (t == ArtifactType::adr) return p->digits == 4;
  return p->digits == 1 || id[id.size() - p->digits] != '0';
}

inline std::uint64_t id_number(std::string_view id) {
  auto p = split_id(id);
  return p ? p->number : 0;
}

// Natural order: prefix, then numeric suffix, then raw text.
inline bool id_less(std::string_view a, std::string_view b) {
  auto pa = split_id(a);
  auto pb = split_id(b);
  if (pa && pb) {
    return std::tuple(pa->prefix, pa->number, a) < std::tuple(pb->prefix, pb->number, b);
  }
  if (pa.has_value() != pb.has_value()) return pa.has_value();
  return a < b;
}

struct IdLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const { return id_less(a, b); }
};

}  // namespace shiftup
