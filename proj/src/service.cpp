#include "sebench/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace sebench::service {

using json = nlohmann::json;

namespace {

Response error_response(int status, std::string_view code, std::string_view message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json"};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::pair<std::string, int> parse_listen(std::string_view listen) {
  const std::size_t colon = listen.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("listen address must be host:port");
  const std::string host(listen.substr(0, colon));
  const std::string port_text(listen.substr(colon + 1));
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw ConfigError("invalid port in listen address '" + std::string(listen) + "'");
  return {host, port};
}

ServiceConfig ServiceConfig::from_json_text(std::string_view json_text, const std::filesystem::path& base_dir) {
  ServiceConfig cfg;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  try {
    if (j.contains("listen")) std::tie(cfg.host, cfg.port) = parse_listen(j.at("listen").get<std::string>());
    if (j.contains("top_k")) {
      const auto k = j.at("top_k").get<long long>();
      if (k < 1) throw ConfigError("top_k must be at least 1");
      cfg.top_k = static_cast<std::size_t>(k);
    }
    if (j.contains("cors")) cfg.cors_allowlist = j.at("cors").get<std::vector<std::string>>();
    if (j.contains("examples")) cfg.examples = resolve(base_dir, j.at("examples").get<std::string>());
    if (j.contains("backends")) {
      for (const auto& [name, spec] : j.at("backends").items()) {
        BackendSpec b;
        if (spec.contains("corpus")) b.corpus = resolve(base_dir, spec.at("corpus").get<std::string>());
        if (spec.contains("url")) b.url = spec.at("url").get<std::string>();
        if (b.corpus.has_value() == b.url.has_value()) {
          throw ConfigError("backend '" + name + "' needs exactly one of \"corpus\" or \"url\"");
        }
        cfg.backends[name] = b;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed service config: ") + e.what());
  }
  return cfg;
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  return from_json_text(read_file(path), path.parent_path());
}

void ServiceConfig::apply_env() {
  if (const char* listen = std::getenv("SEBENCH_LISTEN"); listen && *listen) {
    std::tie(host, port) = parse_listen(listen);
  }
}

void ServiceConfig::validate() const {
  if (backends.empty()) throw ConfigError("service config needs at least one backend");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (port < 0 || port > 65535) throw ConfigError("invalid port");
}

// ---------------------------------------------------------------------------
// Service

Service::Service(std::size_t top_k, std::vector<std::shared_ptr<const mlm::MlmBackend>> backends,
                 std::vector<mlm::MaskedExample> examples, std::vector<std::string> cors_allowlist)
    : top_k_(top_k), backends_(std::move(backends)), examples_(std::move(examples)), cors_(std::move(cors_allowlist)) {
  if (top_k_ < 1) throw ConfigError("top_k must be at least 1");
  if (backends_.empty()) throw ConfigError("service needs at least one backend");
  std::sort(backends_.begin(), backends_.end(), [](const auto& a, const auto& b) { return a->name() < b->name(); });
  for (std::size_t i = 1; i < backends_.size(); ++i) {
    if (backends_[i]->name() == backends_[i - 1]->name()) {
      throw ConfigError("duplicate backend name '" + backends_[i]->name() + "'");
    }
  }
}

Service Service::from_config(const ServiceConfig& config) {
  config.validate();
  std::vector<std::shared_ptr<const mlm::MlmBackend>> backends;
  for (const auto& [name, spec] : config.backends) {
    if (spec.corpus) {
      backends.push_back(std::make_shared<mlm::BaselineBackend>(name, read_lines(*spec.corpus)));
    } else {
      backends.push_back(std::make_shared<mlm::HttpBackend>(name, *spec.url));
    }
  }
  std::vector<mlm::MaskedExample> examples;
  if (config.examples) examples = mlm::load_examples(*config.examples);
  return Service(config.top_k, std::move(backends), std::move(examples), config.cors_allowlist);
}

const mlm::MlmBackend* Service::find(std::string_view name) const {
  for (const auto& b : backends_) {
    if (b->name() == name) return b.get();
  }
  return nullptr;
}

Response Service::backends() const {
  json names = json::array();
  for (const auto& b : backends_) names.push_back(b->name());
  return {200, json{{"backends", names}, {"top_k", top_k_}}.dump()};
}

Response Service::examples() const { return {200, mlm::examples_to_json(examples_)}; }

Response Service::predict(std::string_view body) const {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "invalid_json", "request body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("backend") || !j.at("backend").is_string() || !j.contains("sentence") ||
      !j.at("sentence").is_string()) {
    return error_response(400, "validation", "request needs string fields \"backend\" and \"sentence\"");
  }
  std::size_t top_k = top_k_;
  if (j.contains("top_k")) {
    if (!j.at("top_k").is_number_integer() || j.at("top_k").get<long long>() < 1) {
      return error_response(400, "validation", "top_k must be a positive integer");
    }
    top_k = static_cast<std::size_t>(j.at("top_k").get<long long>());
  }
  const std::string name = j.at("backend").get<std::string>();
  const mlm::MlmBackend* backend = find(name);
  if (!backend) return error_response(404, "unknown_backend", "unknown backend '" + name + "'");
  const std::string sentence = j.at("sentence").get<std::string>();
  const std::size_t masks = mlm::count_masks(sentence);
  if (masks != 1) {
    return error_response(400, "validation",
                          "sentence must contain exactly one [MASK], found " + std::to_string(masks));
  }
  try {
    mlm::PredictionSet set = backend->predict(sentence, top_k);
    set.model_name = backend->name();
    mlm::normalize_predictions(set, top_k);
    return {200, mlm::prediction_set_to_json(set)};
  } catch (const std::exception& e) {
    return error_response(502, "backend_failure", e.what());
  }
}

Response Service::report(std::string_view body) const {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "invalid_json", "request body is not valid JSON");
  }
  if (!j.is_object()) return error_response(400, "validation", "request body must be a JSON object");
  std::optional<std::set<int>> ids;
  try {
    if (j.contains("example_ids")) {
      const auto list = j.at("example_ids").get<std::vector<int>>();
      ids.emplace(list.begin(), list.end());
    }
  } catch (const json::exception&) {
    return error_response(400, "validation", "example_ids must be a list of integers");
  }
  try {
    mlm::BenchmarkResult result;
    if (j.contains("rows")) {
      // A previously produced result, optionally narrowed to some examples.
      result = mlm::result_from_json(body);
      if (ids) {
        std::erase_if(result.examples, [&](const auto& ex) { return !ids->contains(ex.id); });
        std::erase_if(result.outcomes, [&](const auto& o) { return !ids->contains(o.example_id); });
      }
    } else {
      // Selection over the served examples and backends, run now.
      std::vector<mlm::MaskedExample> chosen;
      for (const auto& ex : examples_) {
        if (!ids || ids->contains(ex.id)) chosen.push_back(ex);
      }
      std::vector<std::shared_ptr<const mlm::MlmBackend>> chosen_backends;
      if (j.contains("backends")) {
        for (const auto& name : j.at("backends").get<std::vector<std::string>>()) {
          const auto it = std::find_if(backends_.begin(), backends_.end(),
                                       [&](const auto& b) { return b->name() == name; });
          if (it == backends_.end()) return error_response(404, "unknown_backend", "unknown backend '" + name + "'");
          chosen_backends.push_back(*it);
        }
      } else {
        chosen_backends = backends_;
      }
      mlm::RunOptions opts;
      opts.top_k = j.contains("top_k") ? j.at("top_k").get<std::size_t>() : top_k_;
      result = mlm::run_benchmark(chosen, chosen_backends, opts);
    }
    return {200, mlm::render_report(result, mlm::ReportFormat::markdown), "text/markdown; charset=utf-8"};
  } catch (const json::exception& e) {
    return error_response(400, "validation", e.what());
  } catch (const ConfigError& e) {
    return error_response(400, "validation", e.what());
  } catch (const InputError& e) {
    return error_response(400, "validation", e.what());
  }
}

std::optional<std::string> Service::allowed_origin(std::string_view origin) const {
  if (origin.empty()) return std::nullopt;
  for (const auto& allowed : cors_) {
    if (allowed == "*" || allowed == origin) return std::string(origin);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Server

struct Server::Impl {
  explicit Impl(const Service& s) : service(s) {}
  const Service& service;
  httplib::Server http;
  std::thread thread;
  bool bound = false;
};

Server::Server(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& http = impl_->http;
  // httplib's default adds SO_REUSEPORT, which lets two servers share a port.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  const Service& svc = service;
  auto send = [&svc](const httplib::Request& req, httplib::Response& res, const Response& r) {
    if (auto origin = svc.allowed_origin(req.get_header_value("Origin"))) {
      res.set_header("Access-Control-Allow-Origin", *origin);
      res.set_header("Vary", "Origin");
    }
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.Get("/backends", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.backends());
  });
  http.Get("/examples", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.examples());
  });
  http.Post("/predict", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.predict(req.body));
  });
  http.Post("/report", [&svc, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, svc.report(req.body));
  });
  http.Options(R"(/.*)", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (auto origin = svc.allowed_origin(req.get_header_value("Origin"))) {
      res.set_header("Access-Control-Allow-Origin", *origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Vary", "Origin");
      res.status = 204;
    } else {
      res.status = 403;
    }
  });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      const Response r = error_response(res.status, "not_found", "no such endpoint");
      res.set_content(r.body, r.content_type);
    }
  });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    const Response r = error_response(500, "internal", what);
    res.status = 500;
    res.set_content(r.body, r.content_type);
  });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound_port = port;
  if (port == 0) {
    bound_port = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound_port = -1;
  }
  if (bound_port < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound_port;
}

void Server::start() {
  if (!impl_->bound) throw ConfigError("server must be bound before it starts");
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::run() {
  if (!impl_->bound) throw ConfigError("server must be bound before it runs");
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace sebench::service
