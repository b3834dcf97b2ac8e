#include <doctest.h>

#include <cstdlib>
#include <map>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "sebench/service.hpp"
#include "support.hpp"

using namespace sebench;
using namespace sebench::service;
using json = nlohmann::json;

namespace {

std::string toy_config(const std::string& extra = "") {
  json j{{"listen", "127.0.0.1:0"},
         {"top_k", 5},
         {"examples", testing::fixture("validation_examples.json").string()},
         {"backends", {{"baseline", {{"corpus", testing::fixture("mlm/toy_corpus.txt").string()}}}}}};
  if (!extra.empty()) j.merge_patch(json::parse(extra));
  return j.dump();
}

Service toy_service(const std::string& extra = "") {
  return Service::from_config(ServiceConfig::from_json_text(toy_config(extra)));
}

// Next-word counts after `prev`, straight from the corpus text.
std::map<std::string, double> following(const std::string& corpus, const std::string& prev) {
  static const std::regex token(R"([a-z]+|[.])");
  std::vector<std::string> toks;
  for (auto it = std::sregex_iterator(corpus.begin(), corpus.end(), token); it != std::sregex_iterator(); ++it) {
    toks.push_back(it->str());
  }
  std::map<std::string, double> counts;
  double total = 0;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    if (toks[i] == prev) {
      counts[toks[i + 1]] += 1;
      total += 1;
    }
  }
  for (auto& [w, c] : counts) c /= total;
  return counts;
}

std::string error_code(const Response& r) { return json::parse(r.body).at("error").at("code").get<std::string>(); }

struct ScopedEnv {
  explicit ScopedEnv(const char* value) {
    if (const char* old = std::getenv("SEBENCH_LISTEN")) previous = old;
    ::setenv("SEBENCH_LISTEN", value, 1);
  }
  ~ScopedEnv() {
    if (previous) {
      ::setenv("SEBENCH_LISTEN", previous->c_str(), 1);
    } else {
      ::unsetenv("SEBENCH_LISTEN");
    }
  }
  std::optional<std::string> previous;
};

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("listen addresses") {
    CHECK(parse_listen("0.0.0.0:8080") == std::pair<std::string, int>{"0.0.0.0", 8080});
    CHECK(parse_listen("localhost:0").second == 0);
    CHECK_THROWS_AS(parse_listen("8080"), ConfigError);
    CHECK_THROWS_AS(parse_listen(":80"), ConfigError);
    CHECK_THROWS_AS(parse_listen("h:70000"), ConfigError);
    CHECK_THROWS_AS(parse_listen("h:80x"), ConfigError);
  }

  TEST_CASE("config parsing") {
    const auto c = ServiceConfig::from_json_text(
        R"({"listen":"0.0.0.0:9000","top_k":3,"cors":["http://a"],"examples":"ex.json",
            "backends":{"b":{"corpus":"c.txt"},"u":{"url":"http://x:1"}}})",
        "/base");
    CHECK(c.host == "0.0.0.0");
    CHECK(c.port == 9000);
    CHECK(c.top_k == 3);
    CHECK(c.cors_allowlist == std::vector<std::string>{"http://a"});
    CHECK(c.examples == std::filesystem::path("/base/ex.json"));
    CHECK(c.backends.at("b").corpus == std::filesystem::path("/base/c.txt"));
    CHECK(c.backends.at("u").url == "http://x:1");
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_AS(ServiceConfig::from_json_text("{"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text("[]"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text(R"({"top_k":0})"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text(R"({"backends":{"x":{}}})"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text(R"({"backends":{"x":{"corpus":"a","url":"b"}}})"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text(R"({"top_k":"five"})"), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::from_json_text("{}").validate(), ConfigError);
    CHECK_THROWS_AS(ServiceConfig::load("/nonexistent/service.json"), ConfigError);
  }

  TEST_CASE("listen address from the environment") {
    auto c = ServiceConfig::from_json_text(toy_config());
    {
      const ScopedEnv env("10.0.0.1:7777");
      c.apply_env();
    }
    CHECK(c.host == "10.0.0.1");
    CHECK(c.port == 7777);
    const ScopedEnv bad("nope");
    CHECK_THROWS_AS(c.apply_env(), ConfigError);
  }

  TEST_CASE("backends listing") {
    const auto svc = toy_service();
    const auto r = svc.backends();
    CHECK(r.status == 200);
    const auto j = json::parse(r.body);
    CHECK(j.at("backends") == json::array({"baseline"}));
    CHECK(j.at("top_k") == 5);
  }

  TEST_CASE("predict matches a hand count of the corpus") {
    const auto svc = toy_service();
    const auto r = svc.predict(R"({"backend":"baseline","sentence":"a [MASK]","top_k":5})");
    REQUIRE(r.status == 200);
    const auto want = following(testing::read_file(testing::fixture("mlm/toy_corpus.txt")), "a");
    const auto j = json::parse(r.body);
    CHECK(j.at("model_name") == "baseline");
    const auto& preds = j.at("predictions");
    REQUIRE(preds.size() == want.size());
    double last = 2.0;
    for (const auto& p : preds) {
      const auto tok = p.at("token").get<std::string>();
      REQUIRE(want.count(tok) == 1);
      CHECK(p.at("prob").get<double>() == doctest::Approx(want.at(tok)).epsilon(1e-12));
      CHECK(p.at("prob").get<double>() <= last);
      last = p.at("prob").get<double>();
    }
    const auto one = json::parse(svc.predict(R"({"backend":"baseline","sentence":"a [MASK]","top_k":1})").body);
    CHECK(one.at("predictions").size() == 1);
  }

  TEST_CASE("predict errors") {
    const auto svc = toy_service();
    const auto none = svc.predict(R"({"backend":"baseline","sentence":"no mask here"})");
    CHECK(none.status == 400);
    CHECK(error_code(none) == "validation");
    CHECK(svc.predict(R"({"backend":"baseline","sentence":"[MASK] [MASK]"})").status == 400);
    const auto unknown = svc.predict(R"({"backend":"gpt","sentence":"a [MASK]"})");
    CHECK(unknown.status == 404);
    CHECK(error_code(unknown) == "unknown_backend");
    CHECK(error_code(svc.predict("not json")) == "invalid_json");
    CHECK(svc.predict(R"({"sentence":"a [MASK]"})").status == 400);
    CHECK(svc.predict(R"({"backend":"baseline","sentence":"a [MASK]","top_k":0})").status == 400);
  }

  TEST_CASE("upstream failure is a 502") {
    const Service svc(5, {std::make_shared<mlm::HttpBackend>("down", "http://127.0.0.1:" +
                                                                          std::to_string(testing::unused_port()),
                                                             std::chrono::milliseconds(500))},
                      {});
    const auto r = svc.predict(R"({"backend":"down","sentence":"a [MASK]"})");
    CHECK(r.status == 502);
    CHECK(error_code(r) == "backend_failure");
  }

  TEST_CASE("examples endpoint serves the 30 fixture sentences") {
    const auto r = toy_service().examples();
    CHECK(r.status == 200);
    const auto j = json::parse(r.body);
    REQUIRE(j.is_array());
    CHECK(j.size() == 30);
  }

  TEST_CASE("report renders markdown") {
    const auto svc = toy_service();
    const auto r = svc.report(R"({"example_ids":[1,2,3]})");
    REQUIRE(r.status == 200);
    CHECK(r.content_type.find("text/markdown") == 0);
    CHECK(r.body.find("baseline") != std::string::npos);

    const auto full = mlm::run_benchmark(mlm::load_examples(testing::fixture("validation_examples.json")),
                                         {std::make_shared<mlm::BaselineBackend>(
                                             "baseline", std::vector<std::string>{"a b. a c. a b."})},
                                         {});
    const auto again = svc.report(mlm::render_report(full, mlm::ReportFormat::json));
    CHECK(again.status == 200);
    CHECK(again.body == mlm::render_report(full, mlm::ReportFormat::markdown));

    CHECK(svc.report(R"({"backends":["nope"]})").status == 404);
    CHECK(svc.report(R"({"example_ids":"x"})").status == 400);
    CHECK(svc.report("[").status == 400);
    CHECK(svc.report(R"({"example_ids":[999]})").status == 400);
  }

  TEST_CASE("cors allowlist") {
    const auto open = toy_service(R"({"cors":["*"]})");
    CHECK(open.allowed_origin("http://x") == "http://x");
    CHECK_FALSE(open.allowed_origin("").has_value());
    const auto strict = toy_service(R"({"cors":["http://ok"]})");
    CHECK(strict.allowed_origin("http://ok") == "http://ok");
    CHECK_FALSE(strict.allowed_origin("http://evil").has_value());
  }

  TEST_CASE("live server") {
    const auto svc = toy_service(R"({"cors":["http://ui"]})");
    Server server(svc);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    server.start();
    httplib::Client client("127.0.0.1", port);

    const auto b = client.Get("/backends");
    REQUIRE(b);
    CHECK(b->status == 200);

    const auto p = client.Post("/predict", {{"Origin", "http://ui"}},
                               R"({"backend":"baseline","sentence":"a [MASK]"})", "application/json");
    REQUIRE(p);
    CHECK(p->status == 200);
    CHECK(p->get_header_value("Access-Control-Allow-Origin") == "http://ui");
    CHECK(p->body == svc.predict(R"({"backend":"baseline","sentence":"a [MASK]"})").body);

    const auto bad = client.Post("/predict", R"({"backend":"zzz","sentence":"a [MASK]"})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 404);

    const auto pre = client.Options("/predict", {{"Origin", "http://ui"}});
    REQUIRE(pre);
    CHECK(pre->status == 204);
    const auto denied = client.Options("/predict", {{"Origin", "http://evil"}});
    REQUIRE(denied);
    CHECK(denied->status == 403);

    const auto ex = client.Get("/examples");
    REQUIRE(ex);
    CHECK(json::parse(ex->body).size() == 30);

    const auto missing = client.Get("/nothing");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body).at("error").at("code") == "not_found");

    const auto rep = client.Post("/report", R"({"example_ids":[4]})", "application/json");
    REQUIRE(rep);
    CHECK(rep->status == 200);
    server.stop();
  }

  TEST_CASE("predictions are stable across restarts") {
    std::string first;
    for (int round = 0; round < 2; ++round) {
      const auto svc = toy_service();
      Server server(svc);
      const int port = server.bind("127.0.0.1", 0);
      server.start();
      httplib::Client client("127.0.0.1", port);
      const auto r = client.Post("/predict", R"({"backend":"baseline","sentence":"[MASK] b"})", "application/json");
      REQUIRE(r);
      if (round == 0) {
        first = r->body;
      } else {
        CHECK(r->body == first);
      }
    }
    CHECK_FALSE(first.empty());
  }

  TEST_CASE("binding errors") {
    const auto svc = toy_service();
    Server a(svc);
    const int port = a.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    Server b(svc);
    CHECK_THROWS_AS(b.bind("127.0.0.1", port), ConfigError);
    Server bad_host(svc);
    CHECK_THROWS_AS(bad_host.bind("256.0.0.1", 80), ConfigError);
    Server c(svc);
    CHECK_THROWS_AS(c.start(), ConfigError);
  }
}
