#include "nsdx/review_http.hpp"

#include "httplib.h"
#include "nsdx/errors.hpp"

namespace nsdx {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, nlohmann::ordered_json{{"error", message}});
}

}  // namespace

struct ReviewServer::Impl {
  ReviewService& service;
  httplib::Server server;

  explicit Impl(ReviewService& s) : service(s) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/cases", [this](const httplib::Request&, httplib::Response& res) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& c : service.list_cases())
        arr.push_back({{"case_id", c.case_id}, {"stage", std::string(to_string(c.stage))}, {"complete", c.complete()}});
      send_json(res, 200, arr);
    });

    server.Get(R"(/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, req.matches[1], [&] { send_json(res, 200, service.get_case(req.matches[1])); });
    });

    server.Post(R"(/cases/([^/]+)/stage)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, req.matches[1], [&] {
        nlohmann::json payload;
        try {
          payload = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
          throw PayloadError(std::string("malformed JSON: ") + e.what());
        }
        send_json(res, 200, service.submit_stage(req.matches[1], payload));
      });
    });

    server.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, "", [&] { send_json(res, 200, to_json(service.report())); });
    });
  }

  template <typename F>
  void guarded(httplib::Response& res, const std::string& case_id, F&& body) {
    try {
      body();
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const StateError& e) {
      nlohmann::ordered_json j{{"error", e.what()}};
      try {
        j["stage"] = std::string(to_string(service.stage_of(case_id)));
      } catch (const Error&) {
      }
      send_json(res, 409, j);
    } catch (const ValidationFailure& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }
};

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>(service)) {}
ReviewServer::~ReviewServer() = default;

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw StartupError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw StartupError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewServer::run() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() { impl_->server.stop(); }

}  // namespace nsdx
