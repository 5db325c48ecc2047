#pragma once

// JSON HTTP API over a Workspace. Every mutating route calls the same Workspace
// operation the CLI uses.

#include <atomic>
#include <string>

#include "httplib.h"
#include "workspace.hpp"

namespace shiftup {

class Service {
 public:
  explicit Service(Workspace& workspace, std::optional<fs::path> static_dir = std::nullopt) : ws_(workspace) {
    routes();
    if (static_dir) server_.set_mount_point("/", static_dir->string());
  }

  // Blocks until stop() is called.
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
    send(res, status, {{"error", error}, {"detail", detail}});
  }

  static int status_for(const LoopError& e) {
    const auto& c = e.code();
    if (c == "unknown-issue") return 404;
    if (c == "bad-request") return 400;
    if (c == "agent-failure" || c == "runner-error" || c == "foreign-test-id" || c == "missing-test-id" ||
        c == "empty-plan")
      return 502;
    return 409;
  }

  // Wraps a handler with the error mapping shared by every route.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const LoopError& e) {
        send_error(res, status_for(e), e.code(), e.what());
      } catch (const Json::exception& e) {
        send_error(res, 400, "malformed-body", e.what());
      } catch (const FormatError& e) {
        send_error(res, 400, "malformed-body", e.what());
      } catch (const ConfigError& e) {
        send_error(res, 500, "config", e.what());
      } catch (const DependencyCycle& e) {
        send(res, 409, {{"error", "cycle"}, {"detail", e.what()}, {"members", e.members()}});
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  static Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw FormatError("request body must be a JSON object");
    return j;
  }

  void post_action(const std::string& action, std::function<LoopRun(const std::string&, const Json&)> fn) {
    server_.Post("/api/loop/([A-Za-z0-9-]+)/" + action,
                 guarded([fn](const httplib::Request& req, httplib::Response& res) {
                   auto body = body_of(req);
                   send(res, 200, to_json(fn(req.matches[1], body)));
                 }));
  }

  void routes() {
    server_.Get("/api/bundle/summary",
                guarded([this](const httplib::Request&, httplib::Response& res) { send(res, 200, ws_.summary()); }));
    server_.Get("/api/graph", guarded([this](const httplib::Request&, httplib::Response& res) {
                  send(res, 200, to_json(ws_.graph()));
                }));
    server_.Get("/api/phases/order", guarded([this](const httplib::Request&, httplib::Response& res) {
                  send(res, 200, {{"order", phase_order(ws_.graph())}});
                }));
    server_.Get("/api/coverage", guarded([this](const httplib::Request&, httplib::Response& res) {
                  send(res, 200, to_json(coverage_report(ws_.graph())));
                }));
    server_.Get("/api/issues",
                guarded([this](const httplib::Request&, httplib::Response& res) { send(res, 200, ws_.issues()); }));

    server_.Get("/api/loop/([A-Za-z0-9-]+)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto run = ws_.run_of(req.matches[1]);
                  if (!run) {
                    ws_.events(req.matches[1], 0);  // 404 for unknown issues
                    return send_error(res, 404, "no-run", "no loop has been opened for " + std::string(req.matches[1]));
                  }
                  send(res, 200, to_json(*run));
                }));

    server_.Get("/api/loop/([A-Za-z0-9-]+)/events",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  std::uint64_t after = 0;
                  std::chrono::milliseconds wait{0};
                  try {
                    if (req.has_param("after")) {
                      after = std::stoull(req.get_param_value("after"));
                      wait = std::chrono::milliseconds(15000);
                    }
                    if (req.has_param("timeout_ms")) wait = std::chrono::milliseconds(std::stoll(req.get_param_value("timeout_ms")));
                  } catch (const std::exception&) {
                    return send_error(res, 400, "malformed-query", "after and timeout_ms must be integers");
                  }
                  Json events = Json::array();
                  for (const auto& e : ws_.events(req.matches[1], after, wait)) events.push_back(to_json(e));
                  send(res, 200, {{"issue", std::string(req.matches[1])}, {"events", events}});
                }));

    post_action("open", [this](const std::string& issue, const Json& body) {
      return ws_.open(issue, loop_options_from_json(body));
    });
    post_action("plan", [this](const std::string& issue, const Json&) { return ws_.draft_plan(issue); });
    post_action("reject", [this](const std::string& issue, const Json& body) {
      return ws_.reject_plan(issue, body.value("reason", std::string()));
    });
    post_action("approve", [this](const std::string& issue, const Json&) { return ws_.approve_plan(issue); });
    post_action("step", [this](const std::string& issue, const Json&) { return ws_.step(issue); });
    post_action("run-to-completion",
                [this](const std::string& issue, const Json&) { return ws_.run_to_completion(issue); });

    server_.Get("/api/reports/prompts", guarded([this](const httplib::Request&, httplib::Response& res) {
                  auto path = ws_.root() / kPromptLog;
                  std::error_code ec;
                  if (!fs::exists(path, ec)) return send_error(res, 404, "no-log", path.string() + " does not exist");
                  auto log = load_prompt_log(path);
                  Json reports = Json::array();
                  try {
                    for (auto p : {Paradigm::shift_up, Paradigm::structured_vibe})
                      reports.push_back(to_json(distribution_report(log, p)));
                  } catch (const UncategorizedPrompts& e) {
                    Json list = Json::array();
                    for (const auto& r : e.records()) list.push_back(to_json(r));
                    return send(res, 422, {{"error", "uncategorized"}, {"detail", e.what()}, {"records", list}});
                  }
                  send(res, 200, {{"reports", reports}});
                }));
  }

  Workspace& ws_;
  httplib::Server server_;
};

}  // namespace shiftup
