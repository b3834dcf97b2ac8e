#include "support.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <stdlib.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace testing {

using json = nlohmann::json;

std::filesystem::path fixture(std::string_view relative) {
  return std::filesystem::path(SEBENCH_FIXTURE_DIR) / relative;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::filesystem::path stub_classifier_path() { return SEBENCH_STUB_CLASSIFIER; }

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "sebench-test-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::size_t Gen::in(std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1));
}

std::string Gen::word(std::size_t min_len, std::size_t max_len, std::string_view alphabet) {
  const std::size_t n = in(min_len, max_len);
  std::string w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(alphabet[rng_.below(alphabet.size())]);
  return w;
}

std::string Gen::sentence(const std::vector<std::string>& lexicon, std::size_t min_words, std::size_t max_words) {
  const std::size_t n = in(min_words, max_words);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s.push_back(' ');
    s += pick(lexicon);
  }
  return s;
}

std::string random_markup_text(Gen& g) {
  static const std::vector<std::string> words{
      "the", "build", "fails", "when", "Parser", "is", "null", "and", "it", "throws", "an", "Exception",
      "in", "this", "method", "we", "should", "fix", "Bug", "for", "release", "with", "config", "file"};
  static const std::vector<std::string> decorations{
      "`code()`", "**bold**", "_em_", "<b>tag</b>", "<code>x</code>", "&amp;", "@alice", "@bob-dev",
      "deadbeef12", "1234567", "[HASH]", "[CODE]", "[USER]", "{code}x{code}", "[~jdoe]", "{{mono}}",
      "h2.", "#", ">", "-", "[link](http://x)", "CAFEBABE99", "e.g.", "!", "?", "\n", "\t", "“q”"};
  std::string out;
  const std::size_t n = g.in(3, 30);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out.push_back(g.chance(0.1) ? '\n' : ' ');
    out += g.chance(0.25) ? g.pick(decorations) : g.pick(words);
    if (g.chance(0.15)) out.push_back('.');
  }
  return out;
}

// ---------------------------------------------------------------------------

struct StubMlmServer::Impl {
  httplib::Server http;
  std::thread thread;
  std::map<std::string, std::vector<sebench::mlm::Prediction>> replies;
  std::set<std::string> failing;
  std::mutex mutex;
  Mode mode = Mode::normal;
  std::atomic<std::size_t> requests{0};
};

StubMlmServer::StubMlmServer(std::map<std::string, std::vector<sebench::mlm::Prediction>> replies, Mode mode)
    : impl_(std::make_unique<Impl>()) {
  impl_->replies = std::move(replies);
  impl_->mode = mode;
  Impl* impl = impl_.get();
  impl_->http.Post("/predict", [impl](const httplib::Request& req, httplib::Response& res) {
    ++impl->requests;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    const std::string sentence = body.value("sentence", std::string());
    const std::size_t top_k = body.value("top_k", std::size_t{5});
    {
      std::lock_guard lock(impl->mutex);
      if (impl->mode == Mode::fail || impl->failing.contains(sentence)) {
        res.status = 500;
        res.set_content("stub failure", "text/plain");
        return;
      }
    }
    if (impl->mode == Mode::malformed) {
      res.set_content("{\"predictions\": 42}", "application/json");
      return;
    }
    std::vector<sebench::mlm::Prediction> preds;
    const auto it = impl->replies.find(sentence);
    if (it != impl->replies.end()) {
      preds = it->second;
    } else {
      preds = {{"alpha", 0.4}, {"beta", 0.3}, {"gamma", 0.2}, {"delta", 0.06}, {"epsilon", 0.03}, {"zeta", 0.01}};
    }
    if (preds.size() > top_k) preds.resize(top_k);
    if (impl->mode == Mode::unsorted) std::reverse(preds.begin(), preds.end());
    json arr = json::array();
    for (const auto& p : preds) arr.push_back({{"token", p.token}, {"prob", p.prob}});
    res.set_content(json{{"predictions", arr}}.dump(), "application/json");
  });
  port_ = impl_->http.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("stub server cannot bind");
  impl_->thread = std::thread([impl] { impl->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

StubMlmServer::~StubMlmServer() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubMlmServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::size_t StubMlmServer::requests() const { return impl_->requests.load(); }

void StubMlmServer::fail_on(std::string sentence) {
  std::lock_guard lock(impl_->mutex);
  impl_->failing.insert(std::move(sentence));
}

std::map<std::string, std::vector<sebench::mlm::Prediction>> published_replies(std::string_view model_name) {
  const auto examples = sebench::mlm::load_examples(fixture("validation_examples.json"));
  std::map<int, std::string> sentence_of;
  for (const auto& ex : examples) sentence_of[ex.id] = ex.sentence;
  std::map<std::string, std::vector<sebench::mlm::Prediction>> out;
  for (const auto& set : sebench::mlm::parse_prediction_sets(read_file(fixture("published_predictions.json")))) {
    if (set.model_name == model_name) out[sentence_of.at(set.example_id)] = set.predictions;
  }
  return out;
}

int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace testing
