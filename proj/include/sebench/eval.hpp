#pragma once

// Classifier evaluation: labeled datasets, LOPO and repeated stratified CV
// folds, precision/recall/F1, builtin baselines and an external command
// backend.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sebench/error.hpp"

namespace sebench::eval {

struct Item {
  std::string id;
  std::string text;
  std::string label;
  std::optional<std::string> group;
};

struct LabeledDataset {
  std::vector<Item> items;
  std::vector<std::string> label_set;  // sorted
  std::optional<std::string> positive_label;
};

// JSON lines {"id","text","label","group"?}. Rejects duplicate ids.
LabeledDataset read_dataset(std::istream& in);
LabeledDataset load_dataset(const std::filesystem::path& path);
std::string item_to_json(const Item& item);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Any 0/0 is 0.
Metrics metrics(const Confusion& c);
// Unweighted mean over labels. Throws InputError for fewer than two labels.
Metrics macro_metrics(const std::vector<Confusion>& per_label);

// Per-label confusion counts with each label in turn as the positive class.
std::map<std::string, Confusion> confusions(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& predicted,
                                            const std::vector<std::string>& label_set);

struct Split {
  std::string fold_id;
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train;  // indices into the dataset, ascending
  std::vector<std::size_t> test;
};

// One fold per group, ordered by group id. Throws InputError when an item has
// no group or fewer than two groups exist.
std::vector<Split> lopo_folds(const LabeledDataset& data);

// Per repeat: seeded shuffle, stable grouping by label, position k goes to
// fold k mod folds. Throws InputError when |data| < folds or a label has
// fewer than `folds` items.
std::vector<Split> repeated_cv_folds(const LabeledDataset& data, std::size_t repeats, std::size_t folds,
                                     std::uint64_t seed);

class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual std::vector<std::string> predict(const std::vector<Item>& items) const = 0;
};

class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<TrainedModel> train(const std::vector<Item>& train, const std::vector<Item>& validation,
                                              const std::vector<std::string>& label_set) const = 0;
};

// Predicts the most frequent training label; ties go to the lexicographically first.
class MajorityBackend final : public ClassifierBackend {
 public:
  std::string name() const override { return "majority"; }
  std::unique_ptr<TrainedModel> train(const std::vector<Item>& train, const std::vector<Item>& validation,
                                      const std::vector<std::string>& label_set) const override;
};

// Multinomial naive Bayes over lowercased words with add-one smoothing.
// Words never seen in training are ignored; ties go to the lexicographically
// first label.
class UnigramCountBackend final : public ClassifierBackend {
 public:
  std::string name() const override { return "unigram_count"; }
  std::unique_ptr<TrainedModel> train(const std::vector<Item>& train, const std::vector<Item>& validation,
                                      const std::vector<std::string>& label_set) const override;
};

// Words as seen by the unigram baseline.
std::vector<std::string> unigram_words(std::string_view text);

// Runs `exe train --train <jsonl> --val <jsonl> --model-dir <dir>` and
// `exe predict --model-dir <dir> --in <jsonl> --out <jsonl>`.
class CommandBackend final : public ClassifierBackend {
 public:
  explicit CommandBackend(std::string executable);
  std::string name() const override { return "cmd:" + executable_; }
  std::unique_ptr<TrainedModel> train(const std::vector<Item>& train, const std::vector<Item>& validation,
                                      const std::vector<std::string>& label_set) const override;

 private:
  std::string executable_;
};

// "majority", "unigram" / "unigram_count", or "cmd:<exe>".
std::unique_ptr<ClassifierBackend> make_backend(std::string_view spec);

struct ItemPrediction {
  std::string id;
  std::string label;
  std::string predicted;
};

struct FoldResult {
  std::string fold_id;
  std::size_t repeat = 0;
  std::size_t fold = 0;
  bool failed = false;
  std::string error;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::map<std::string, Confusion> per_label;
  // Metrics of the positive label when one is set, otherwise the macro values.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ItemPrediction> predictions;
};

enum class Scheme { lopo, repeated_cv };
Scheme parse_scheme(std::string_view name);
std::string_view to_string(Scheme scheme);

struct EvalOptions {
  Scheme scheme = Scheme::repeated_cv;
  std::size_t repeats = 10;
  std::size_t folds = 10;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_parallel = 1;
};

// Fills the metric fields of a fold from its per-item predictions.
void score_fold(FoldResult& fold, const std::vector<std::string>& label_set,
                const std::optional<std::string>& positive_label);

std::vector<FoldResult> run_eval(const LabeledDataset& data, const ClassifierBackend& backend,
                                 const EvalOptions& options);

double median(std::vector<double> values);

struct EvalRun {
  std::string scheme;
  std::string backend;
  std::uint64_t seed = 0;
  std::vector<std::string> label_set;
  std::optional<std::string> positive_label;
  std::vector<FoldResult> folds;
};

std::string results_to_json(const EvalRun& run);
EvalRun results_from_json(std::string_view json_text);

// Value of `metric` (f1, precision, recall, macro_f1, macro_precision,
// macro_recall) for one fold.
double fold_metric(const FoldResult& fold, std::string_view metric);

}  // namespace sebench::eval
