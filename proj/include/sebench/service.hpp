#pragma once

// HTTP/JSON service for the playground: backend listing, single-sentence
// prediction, the benchmark examples and Markdown report rendering.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sebench/error.hpp"
#include "sebench/mlm.hpp"

namespace sebench::service {

struct BackendSpec {
  std::optional<std::filesystem::path> corpus;  // baseline backend
  std::optional<std::string> url;               // upstream HTTP backend
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::map<std::string, BackendSpec> backends;
  std::size_t top_k = 5;
  std::vector<std::string> cors_allowlist;
  std::optional<std::filesystem::path> examples;

  // {"listen": "host:port", "top_k": 5, "cors": [...], "examples": "file.json",
  //  "backends": {"name": {"corpus": "file.txt"} | {"url": "http://..."}}}
  // Relative paths resolve against base_dir.
  static ServiceConfig from_json_text(std::string_view json_text, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
  // Applies SEBENCH_LISTEN ("host:port") when set.
  void apply_env();
  // Throws ConfigError unless >= 1 backend, top_k >= 1 and a valid port.
  void validate() const;
};

// "host:port" -> (host, port).
std::pair<std::string, int> parse_listen(std::string_view listen);

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class Service {
 public:
  Service(std::size_t top_k, std::vector<std::shared_ptr<const mlm::MlmBackend>> backends,
          std::vector<mlm::MaskedExample> examples, std::vector<std::string> cors_allowlist = {});
  // Loads corpora, connects upstream backends and reads the example file.
  static Service from_config(const ServiceConfig& config);

  Response backends() const;
  Response predict(std::string_view body) const;
  Response examples() const;
  Response report(std::string_view body) const;

  // Origin to echo in Access-Control-Allow-Origin, if the origin is allowed.
  std::optional<std::string> allowed_origin(std::string_view origin) const;

 private:
  const mlm::MlmBackend* find(std::string_view name) const;

  std::size_t top_k_;
  std::vector<std::shared_ptr<const mlm::MlmBackend>> backends_;
  std::vector<mlm::MaskedExample> examples_;
  std::vector<std::string> cors_;
};

// Wraps an HTTP server around a Service. The Service must outlive it.
class Server {
 public:
  explicit Server(const Service& service);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves on a background thread after bind().
  void start();
  // Serves on the calling thread after bind(); returns when stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sebench::service
