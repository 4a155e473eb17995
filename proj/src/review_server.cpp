#include <spdlog/spdlog.h>

#include "httplib.h"
#include "refswap/review_server.hpp"

namespace refswap {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  int status = 400;
  if (e.kind() == ErrorKind::kNotFound) status = 404;
  if (e.kind() == ErrorKind::kIo) status = 500;
  json body{{"error", e.what()}};
  if (e.kind() == ErrorKind::kValidation) body["rule"] = e.what();
  send_json(res, status, body);
}

bool authorized(const httplib::Request& req, const std::string& token) {
  if (token.empty()) return true;
  if (req.get_header_value("X-Review-Token") == token) return true;
  return req.get_header_value("Authorization") == "Bearer " + token;
}

const char* kFallbackIndex =
    "<!doctype html><title>refswap review</title>"
    "<p>The review UI bundle is not installed. The JSON API is available under "
    "<code>/api/</code>.</p>";

}  // namespace

void install_review_routes(httplib::Server& server, ReviewStore& store,
                           const ReviewServerOptions& options) {
  server.set_pre_routing_handler([token = options.token](const httplib::Request& req,
                                                         httplib::Response& res) {
    if (req.path.rfind("/api/", 0) == 0 && !authorized(req, token)) {
      send_json(res, 401, json{{"error", "missing or wrong review token"}});
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server.Get("/api/items", [&store](const httplib::Request& req, httplib::Response& res) {
    try {
      std::optional<ReviewStage> stage;
      if (auto s = req.get_param_value("stage"); !s.empty()) {
        try {
          stage = review_stage_from_string(s);
        } catch (const ValidationError& e) {
          throw ArgumentError(e.what());
        }
      }
      StatusFilter status = status_filter_from_string(req.get_param_value("status"));
      std::size_t limit = 50;
      if (auto l = req.get_param_value("limit"); !l.empty()) {
        try {
          limit = std::stoul(l);
        } catch (const std::exception&) {
          throw ArgumentError("limit must be a positive integer");
        }
      }
      ReviewPage page = store.list(stage, status, req.get_param_value("cursor"), limit);
      send_json(res, 200,
                json{{"items", page.items},
                     {"next_cursor",
                      page.next_cursor ? json(*page.next_cursor) : json(nullptr)}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  server.Post("/api/decisions", [&store](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        throw ValidationError("request body must be a JSON object");
      }
      ReviewDecision stored = store.submit(body.get<ReviewDecision>());
      send_json(res, 200, json{{"ok", true}, {"decision", stored}});
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_json(res, 400, json{{"error", e.what()}});
    }
  });

  server.Get("/api/export", [&store](const httplib::Request& req, httplib::Response& res) {
    bool include_pending = req.get_param_value("include_pending") == "1" ||
                           req.get_param_value("include_pending") == "true";
    ExportResult out = store.export_reviewed(include_pending);
    res.set_content(encode_jsonl(out.instances), "application/x-ndjson");
  });

  server.Get("/api/stats", [&store](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json(store.stats()));
  });

  std::error_code ec;
  if (!options.static_dir.empty() && std::filesystem::is_directory(options.static_dir, ec)) {
    server.set_mount_point("/", options.static_dir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackIndex, "text/html");
    });
  }
}

void serve_review(ReviewStore& store, const ReviewServerOptions& options) {
  httplib::Server server;
  install_review_routes(server, store, options);
  spdlog::info("review service listening on http://{}:{}", options.host, options.port);
  if (!server.listen(options.host, options.port)) {
    throw IoError("cannot listen on " + options.host + ":" + std::to_string(options.port));
  }
}

}  // namespace refswap
