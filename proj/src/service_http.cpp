// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen's product kernels.
#include "irl/service.hpp"

#include <httplib.h>

namespace irl {

struct HttpFrontend::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", std::string(code)}, {"message", message}});
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, 400, to_string(e.code()), e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, "invalid-argument", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

HttpFrontend::HttpFrontend(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  impl_->server.Post("/api/session", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      Json body = req.body.empty() ? Json::object() : Json::parse(req.body);
      auto response = svc.create_session(metadata_from_json(body));
      send_json(res, 200, svc.session_payload(response));
    });
  });
  impl_->server.Post("/api/trajectory", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto result = svc.ingest(upload_from_json(Json::parse(req.body)));
      Json body = {{"accepted", result.accepted},
                   {"observations", result.observations},
                   {"server_touches", result.server_touches},
                   {"client_touches", result.client_touches}};
      if (!result.accepted) body["reason"] = result.reason;
      send_json(res, result.accepted ? 200 : 422, body);
    });
  });
  impl_->server.Get("/api/summary", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(svc.summarize())); });
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::io, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpFrontend::listen() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace irl
