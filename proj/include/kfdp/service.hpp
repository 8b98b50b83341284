#pragma once

// Local query service: sessions hold one uploaded W vector, named plans and
// the per-size closed-testing tables built for them. Requests and responses
// are JSON; handle() is transport-free and the HTTP server only forwards.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "kfdp/io.hpp"

namespace kfdp {

struct ServiceOptions {
  std::string data_dir = ".";
  long nsim = 100000;
  std::uint64_t pool_seed = 7;
  double delta = 0.01;
};

struct Request {
  std::string method;  // GET or POST
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  json body;
};

class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  Response handle(const Request& request);

  std::size_t session_count() const;

 private:
  struct Session;

  std::shared_ptr<Session> session(const std::string& id) const;

  json post_stats(const json& body);
  json post_plans(const json& body);
  json post_bound(const json& body);
  json post_ct_bound(const json& body);
  json post_warmup(const json& body);
  json get_nested_curve(const std::map<std::string, std::string>& query);
  json get_audit(const std::map<std::string, std::string>& query);

  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  long next_id_ = 1;
};

// HTTP front end forwarding to Service::handle.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  // Binds host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves the handler over HTTP until the process is stopped.
void serve(Service& service, const std::string& host, int port);

// Environment variable holding the default data directory.
inline constexpr const char* data_dir_env = "KFDP_DATA_DIR";

}  // namespace kfdp
