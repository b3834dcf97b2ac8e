#pragma once

// Helpers shared by the unit tests and the acceptance runner: fixture paths,
// temp dirs, hand-rolled generators and a stub MLM HTTP server.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sebench/mlm.hpp"
#include "sebench/rng.hpp"

namespace testing {

std::filesystem::path fixture(std::string_view relative);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::filesystem::path stub_classifier_path();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small generator toolkit over the portable RNG.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  sebench::Rng& rng() { return rng_; }
  std::size_t in(std::size_t lo, std::size_t hi);  // inclusive
  bool chance(double p) { return rng_.uniform() < p; }
  double real(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(rng_.below(v.size()))];
  }
  std::string word(std::size_t min_len, std::size_t max_len, std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz");
  std::string sentence(const std::vector<std::string>& lexicon, std::size_t min_words, std::size_t max_words);

 private:
  sebench::Rng rng_;
};

// Noisy SE-flavoured text: markup, hashes, mentions, sentinels and punctuation.
std::string random_markup_text(Gen& g);

// Serves POST /predict by replaying canned predictions keyed by sentence.
// Unknown sentences get a fixed fallback list.
class StubMlmServer {
 public:
  enum class Mode { normal, unsorted, fail, malformed };
  explicit StubMlmServer(std::map<std::string, std::vector<sebench::mlm::Prediction>> replies = {},
                         Mode mode = Mode::normal);
  ~StubMlmServer();
  StubMlmServer(const StubMlmServer&) = delete;
  StubMlmServer& operator=(const StubMlmServer&) = delete;

  int port() const { return port_; }
  std::string url() const;
  std::size_t requests() const;
  // Sentences answered with HTTP 500 regardless of mode.
  void fail_on(std::string sentence);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// Canned replies for one model of the published prediction fixture, keyed by sentence.
std::map<std::string, std::vector<sebench::mlm::Prediction>> published_replies(std::string_view model_name);

// A port on localhost that nothing listens on.
int unused_port();

}  // namespace testing
