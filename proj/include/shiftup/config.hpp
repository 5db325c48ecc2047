#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "artifacts.hpp"

namespace shiftup {

// A probability in [0, 1].
class Probability {
 public:
  constexpr Probability() = default;
  explicit Probability(double p) : value_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability out of [0,1]: " + std::to_string(p));
  }
  constexpr double value() const { return value_; }
  auto operator<=>(const Probability&) const = default;

 private:
  double value_ = 0.0;
};

struct MockAgentParams {
  std::uint64_t seed = 0;
  Probability targeted_success_p{0.5};
  Probability untargeted_success_p{0.1};
  Probability regression_rate{0.05};

  void check() const {
    if (untargeted_success_p > targeted_success_p)
      throw std::invalid_argument("untargeted_success_p must not exceed targeted_success_p");
  }
  bool operator==(const MockAgentParams&) const = default;
};

struct LoopConfig {
  int max_iterations = 25;
  bool require_plan_approval = true;

  void check() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  }
  bool operator==(const LoopConfig&) const = default;
};

enum class AgentKind { mock, command };
inline constexpr EnumNames<AgentKind, 2> kAgentKinds{{{{AgentKind::mock, "mock"}, {AgentKind::command, "command"}}}};

// Contents of shiftup.json.
struct ProjectConfig {
  std::string name;
  AgentKind agent = AgentKind::mock;
  MockAgentParams mock;
  std::string agent_command;
  int agent_timeout_seconds = 600;
  std::string runner_command;
  LoopConfig loop;
  int port = 8080;
  bool operator==(const ProjectConfig&) const = default;
};

inline Json to_json(const ProjectConfig& c) {
  Json agent{{"kind", kAgentKinds.to_string(c.agent)},
             {"seed", c.mock.seed},
             {"targeted_success_p", c.mock.targeted_success_p.value()},
             {"untargeted_success_p", c.mock.untargeted_success_p.value()},
             {"regression_rate", c.mock.regression_rate.value()},
             {"command", c.agent_command},
             {"timeout_seconds", c.agent_timeout_seconds}};
  return {{"name", c.name},
          {"agent", agent},
          {"runner", {{"command", c.runner_command}}},
          {"loop", {{"max_iterations", c.loop.max_iterations}, {"require_plan_approval", c.loop.require_plan_approval}}},
          {"service", {{"port", c.port}}}};
}

// Unknown keys are rejected; absent sections keep their defaults.
inline ProjectConfig config_from_json(const Json& j) {
  using detail::optional_field;
  detail::reject_unknown(j, {"name", "agent", "runner", "loop", "service"}, "shiftup.json");
  ProjectConfig c;
  c.name = optional_field<std::string>(j, "name").value_or("");
  if (auto a = j.find("agent"); a != j.end()) {
    detail::reject_unknown(*a, {"kind", "seed", "targeted_success_p", "untargeted_success_p", "regression_rate",
                                "command", "timeout_seconds"},
                           "agent");
    if (auto k = optional_field<std::string>(*a, "kind")) c.agent = kAgentKinds.parse_or_throw(*k, "agent kind");
    c.mock.seed = optional_field<std::uint64_t>(*a, "seed").value_or(0);
    try {
      if (auto p = optional_field<double>(*a, "targeted_success_p")) c.mock.targeted_success_p = Probability(*p);
      if (auto p = optional_field<double>(*a, "untargeted_success_p")) c.mock.untargeted_success_p = Probability(*p);
      if (auto p = optional_field<double>(*a, "regression_rate")) c.mock.regression_rate = Probability(*p);
      c.mock.check();
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
    c.agent_command = optional_field<std::string>(*a, "command").value_or("");
    c.agent_timeout_seconds = optional_field<int>(*a, "timeout_seconds").value_or(600);
  }
  if (auto r = j.find("runner"); r != j.end()) {
    detail::reject_unknown(*r, {"command"}, "runner");
    c.runner_command = optional_field<std::string>(*r, "command").value_or("");
  }
  if (auto l = j.find("loop"); l != j.end()) {
    detail::reject_unknown(*l, {"max_iterations", "require_plan_approval"}, "loop");
    c.loop.max_iterations = optional_field<int>(*l, "max_iterations").value_or(25);
    c.loop.require_plan_approval = optional_field<bool>(*l, "require_plan_approval").value_or(true);
    if (c.loop.max_iterations < 1) throw FormatError("loop.max_iterations must be >= 1");
  }
  if (auto s = j.find("service"); s != j.end()) {
    detail::reject_unknown(*s, {"port"}, "service");
    c.port = optional_field<int>(*s, "port").value_or(8080);
  }
  return c;
}

}  // namespace shiftup
