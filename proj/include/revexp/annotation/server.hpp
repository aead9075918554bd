#pragma once

// HTTP binding of the annotation service.
//
//   POST /sessions                                  create a session
//   GET  /sessions/{id}                             phase and progress
//   GET  /sessions/{id}/next?annotator=             next blinded item
//   POST /sessions/{id}/labels                      submit one label
//   GET  /sessions/{id}/agreement[?batch_size=]     per-dimension kappa
//   GET  /sessions/{id}/adjudications               calibration disagreements
//   POST /sessions/{id}/adjudications/{item}/resolve
//   GET  /sessions/{id}/review?annotator=           solo labels for review
//   POST /sessions/{id}/reopen                      flag a solo item
//   POST /sessions/{id}/close
//   GET  /sessions/{id}/export                      final records (X-Admin-Token)

#include <filesystem>
#include <functional>
#include <string>

#include <httplib.h>

#include "revexp/annotation/service.hpp"

namespace revexp::annotation {

inline int http_status_for(const std::exception& err) {
  if (dynamic_cast<const NotFoundError*>(&err)) return 404;
  if (dynamic_cast<const ConflictError*>(&err)) return 409;
  if (dynamic_cast<const AuthError*>(&err)) return 403;
  if (dynamic_cast<const ValidationError*>(&err)) return 400;
  return 500;
}

class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service, std::filesystem::path ui_dir = {})
      : service_(service) {
    routes();
    if (!ui_dir.empty()) server_.set_mount_point("/", ui_dir.string());
  }

  // Blocks until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  // Binds to an ephemeral port; returns it. Serve with listen_after_bind().
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  using Handler = std::function<json(const httplib::Request&)>;

  void reply(httplib::Response& res, const Handler& fn, const httplib::Request& req, int ok = 200) {
    try {
      res.set_content(fn(req).dump(), "application/json");
      res.status = ok;
    } catch (const std::exception& err) {
      res.status = http_status_for(err);
      res.set_content(json{{"error", err.what()}}.dump(), "application/json");
    }
  }

  static json body_of(const httplib::Request& req) {
    try {
      auto j = json::parse(req.body);
      if (!j.is_object()) throw ValidationError("request body must be a JSON object");
      return j;
    } catch (const json::parse_error& err) {
      throw ValidationError(std::string("malformed request body: ") + err.what());
    }
  }

  void routes() {
    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.create_session(body_of(r)); }, req, 201);
    });
    server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.status(r.matches[1]); }, req);
    });
    server_.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) {
        return service_.next_item(r.matches[1], r.get_param_value("annotator"));
      }, req);
    });
    server_.Post(R"(/sessions/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.submit_label(r.matches[1], body_of(r)); }, req);
    });
    server_.Get(R"(/sessions/([^/]+)/agreement)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) {
        std::size_t batch = 10;
        if (r.has_param("batch_size")) {
          try {
            batch = std::stoul(r.get_param_value("batch_size"));
          } catch (const std::exception&) {
            throw ValidationError("batch_size must be a positive integer");
          }
        }
        return service_.agreement(r.matches[1], batch);
      }, req);
    });
    server_.Get(R"(/sessions/([^/]+)/adjudications)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.adjudications(r.matches[1]); }, req);
    });
    server_.Post(R"(/sessions/([^/]+)/adjudications/([^/]+)/resolve)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   reply(res, [this](const auto& r) {
                     return service_.resolve(r.matches[1], r.matches[2], body_of(r));
                   }, req);
                 });
    server_.Get(R"(/sessions/([^/]+)/review)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) {
        return service_.review_queue(r.matches[1], r.get_param_value("annotator"));
      }, req);
    });
    server_.Post(R"(/sessions/([^/]+)/reopen)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.reopen(r.matches[1], body_of(r)); }, req);
    });
    server_.Post(R"(/sessions/([^/]+)/close)", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, [this](const auto& r) { return service_.close(r.matches[1], body_of(r)); }, req);
    });
    server_.Get(R"(/sessions/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        std::string out;
        for (const auto& rec : service_.export_records(req.matches[1], req.get_header_value("X-Admin-Token")))
          out += eval::to_json(rec).dump() + "\n";
        res.set_content(out, "application/x-ndjson");
      } catch (const std::exception& err) {
        res.status = http_status_for(err);
        res.set_content(json{{"error", err.what()}}.dump(), "application/json");
      }
    });
  }

  AnnotationService& service_;
  httplib::Server server_;
};

}  // namespace revexp::annotation
