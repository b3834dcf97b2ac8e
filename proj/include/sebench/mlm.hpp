#pragma once

// Masked-sentence benchmark: example fixtures, prediction backends (a bigram
// baseline and an HTTP client), the concurrent benchmark runner and reports.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sebench/error.hpp"

namespace sebench::mlm {

enum class Category { positive, negative, neutral };
std::string_view to_string(Category c);
Category parse_category(std::string_view name);

struct MaskedExample {
  int id = 0;
  std::string sentence;
  Category category = Category::neutral;
  std::vector<std::string> expectation;
  std::string expectation_note;
};

std::size_t count_masks(std::string_view sentence);
// Throws InputError unless the sentence holds exactly one [MASK].
void require_single_mask(std::string_view sentence);

// JSON list of examples. Rejects duplicate ids and sentences without exactly one mask.
std::vector<MaskedExample> parse_examples(std::string_view json_text);
std::vector<MaskedExample> load_examples(const std::filesystem::path& path);
std::string examples_to_json(const std::vector<MaskedExample>& examples);

struct Prediction {
  std::string token;
  double prob = 0.0;
  bool operator==(const Prediction&) const = default;
};

struct PredictionSet {
  std::string model_name;
  int example_id = 0;
  std::vector<Prediction> predictions;
  std::vector<std::string> warnings;
  bool operator==(const PredictionSet&) const = default;
};

std::string prediction_set_to_json(const PredictionSet& set);
PredictionSet prediction_set_from_json(std::string_view json_text);
// JSON list of {"model_name","example_id","predictions"}.
std::vector<PredictionSet> parse_prediction_sets(std::string_view json_text);

// Sorts by probability (descending, token ascending on ties) and caps at
// top_k, appending a warning whenever either changes the list. Throws
// BackendError for probabilities outside [0, 1].
void normalize_predictions(PredictionSet& set, std::size_t top_k);

class MlmBackend {
 public:
  virtual ~MlmBackend() = default;
  virtual const std::string& name() const = 0;
  // Must be safe to call concurrently.
  virtual PredictionSet predict(std::string_view sentence, std::size_t top_k) const = 0;
};

// Previous-word bigram model with unigram backoff. Sentences are split with
// the pipeline's sentence splitter and pre-tokenized like the WordPiece
// tokenizer; "<s>" is the context of a sentence-initial mask.
class BaselineBackend final : public MlmBackend {
 public:
  BaselineBackend(std::string name, const std::vector<std::string>& lines);
  const std::string& name() const override { return name_; }
  PredictionSet predict(std::string_view sentence, std::size_t top_k) const override;

 private:
  using Counts = std::map<std::string, std::uint64_t>;
  std::string name_;
  Counts unigrams_;
  std::unordered_map<std::string, Counts> bigrams_;
};

// Client for POST <url> {"sentence","top_k"} -> {"predictions":[{"token","prob"}]}.
// A URL without a path targets /predict.
class HttpBackend final : public MlmBackend {
 public:
  HttpBackend(std::string name, std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(30));
  const std::string& name() const override { return name_; }
  PredictionSet predict(std::string_view sentence, std::size_t top_k) const override;

 private:
  std::string name_;
  std::string origin_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

struct Outcome {
  int example_id = 0;
  std::string backend;
  std::optional<PredictionSet> predictions;
  std::string error;  // set when predictions is empty
};

struct CategoryScore {
  std::string backend;
  Category category = Category::neutral;
  std::size_t scored = 0;
  std::size_t unscored = 0;
  std::size_t failed = 0;
  std::size_t hits_at_1 = 0;
  std::size_t hits_at_k = 0;
  double hit_at_1() const;
  double hit_at_k() const;
};

struct BenchmarkResult {
  std::size_t top_k = 5;
  std::vector<MaskedExample> examples;  // sorted by id
  std::vector<std::string> backends;    // sorted by name
  std::vector<Outcome> outcomes;        // ordered by (example id, backend name)
  std::vector<CategoryScore> scores;    // ordered by (backend, category)

  const Outcome* find(int example_id, std::string_view backend) const;
};

struct RunOptions {
  std::size_t top_k = 5;
  std::size_t max_in_flight = 4;
};

// Case-insensitive whole-token match against the first k predictions.
bool hit(const std::vector<std::string>& expectation, const std::vector<Prediction>& predictions, std::size_t k);

BenchmarkResult run_benchmark(const std::vector<MaskedExample>& examples,
                              const std::vector<std::shared_ptr<const MlmBackend>>& backends,
                              const RunOptions& options);

// Recomputes per-category scores from the outcomes.
std::vector<CategoryScore> score(const BenchmarkResult& result);

enum class ReportFormat { markdown, json };
// Throws InputError for a result without examples or backends.
std::string render_report(const BenchmarkResult& result, ReportFormat format);
// Inverse of the JSON report.
BenchmarkResult result_from_json(std::string_view json_text);

}  // namespace sebench::mlm
