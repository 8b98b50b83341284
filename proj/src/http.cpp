#include <httplib.h>

#include "kfdp/service.hpp"

namespace kfdp {

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    Request request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [key, value] : req.params) request.query[key] = value;
    request.body = req.body;
    const Response response = service.handle(request);
    res.status = response.status;
    res.set_content(response.body.dump(), "application/json");
  };
  for (const char* path : {"/health", "/nested-curve", "/audit"}) server.Get(path, forward);
  for (const char* path : {"/stats", "/plans", "/bound", "/ct-bound", "/warmup"}) server.Post(path, forward);
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    res.set_content(json{{"error", "NotFound"}, {"message", "no route for " + req.method + " " + req.path}}.dump(),
                    "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() {
  if (!impl_->server.listen_after_bind()) throw std::runtime_error("HTTP server stopped unexpectedly");
}

void HttpServer::stop() { impl_->server.stop(); }

void serve(Service& service, const std::string& host, int port) {
  HttpServer server(service);
  server.bind(host, port);
  server.run();
}

}  // namespace kfdp
