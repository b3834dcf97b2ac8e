#include "sebench/eval.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "sebench/rng.hpp"
#include "sebench/text.hpp"
#include "sebench/wordpiece.hpp"

extern char** environ;

namespace sebench::eval {

using json = nlohmann::json;

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<Item> gather(const LabeledDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<Item> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.items[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Builtin models

class ConstantModel final : public TrainedModel {
 public:
  explicit ConstantModel(std::string label) : label_(std::move(label)) {}
  std::vector<std::string> predict(const std::vector<Item>& items) const override {
    return std::vector<std::string>(items.size(), label_);
  }

 private:
  std::string label_;
};

class NaiveBayesModel final : public TrainedModel {
 public:
  NaiveBayesModel(const std::vector<Item>& train) {
    std::map<std::string, std::size_t> docs;
    for (const Item& it : train) {
      ++docs[it.label];
      auto& counts = word_counts_[it.label];
      for (std::string& w : unigram_words(it.text)) {
        ++counts[w];
        ++totals_[it.label];
        vocab_.insert(std::move(w));
      }
    }
    for (const auto& [label, n] : docs) {
      labels_.push_back(label);
      log_prior_[label] = std::log(static_cast<double>(n) / static_cast<double>(train.size()));
    }
  }

  std::vector<std::string> predict(const std::vector<Item>& items) const override {
    std::vector<std::string> out;
    out.reserve(items.size());
    const double v = static_cast<double>(vocab_.size());
    for (const Item& it : items) {
      const std::vector<std::string> words = unigram_words(it.text);
      const std::string* best = nullptr;
      double best_score = -std::numeric_limits<double>::infinity();
      for (const std::string& label : labels_) {
        double s = log_prior_.at(label);
        const auto wc = word_counts_.find(label);
        const double total = static_cast<double>(totals_.count(label) ? totals_.at(label) : 0);
        for (const std::string& w : words) {
          if (!vocab_.contains(w)) continue;
          std::uint64_t c = 0;
          if (wc != word_counts_.end()) {
            const auto f = wc->second.find(w);
            if (f != wc->second.end()) c = f->second;
          }
          s += std::log((static_cast<double>(c) + 1.0) / (total + v));
        }
        // labels_ is sorted, so strict > keeps the first label on ties.
        if (!best || s > best_score) {
          best = &label;
          best_score = s;
        }
      }
      out.push_back(*best);
    }
    return out;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, double> log_prior_;
  std::map<std::string, std::unordered_map<std::string, std::uint64_t>> word_counts_;
  std::map<std::string, std::uint64_t> totals_;
  std::unordered_set<std::string> vocab_;
};

// ---------------------------------------------------------------------------
// External command

void write_items(const std::filesystem::path& path, const std::vector<Item>& items, bool with_label) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BackendError("cannot write " + path.string());
  for (const Item& it : items) {
    json j{{"id", it.id}, {"text", it.text}};
    if (with_label) {
      j["label"] = it.label;
      if (it.group) j["group"] = *it.group;
    }
    out << j.dump() << '\n';
  }
}

std::string tail_of(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (s.size() > 400) s = s.substr(s.size() - 400);
  return std::string(text::trim(s));
}

void run_command(const std::vector<std::string>& args, const std::filesystem::path& log) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw BackendError("cannot start '" + args[0] + "': " + std::strerror(rc));
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw BackendError("waiting for '" + args[0] + "' failed");
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string how = WIFEXITED(status) ? "exit status " + std::to_string(WEXITSTATUS(status))
                                              : "signal " + std::to_string(WTERMSIG(status));
    throw BackendError("'" + args[0] + " " + args[1] + "' failed with " + how + ": " + tail_of(log));
  }
}

std::filesystem::path make_temp_dir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "sebench-model-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw BackendError("cannot create a temporary model directory");
  return pattern;
}

class CommandModel final : public TrainedModel {
 public:
  CommandModel(std::string exe, std::filesystem::path dir) : exe_(std::move(exe)), dir_(std::move(dir)) {}
  ~CommandModel() override {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }

  std::vector<std::string> predict(const std::vector<Item>& items) const override {
    const auto in = dir_ / "predict-in.jsonl";
    const auto out = dir_ / "predict-out.jsonl";
    write_items(in, items, false);
    run_command({exe_, "predict", "--model-dir", (dir_ / "model").string(), "--in", in.string(), "--out", out.string()},
                dir_ / "log.txt");
    std::ifstream f(out, std::ios::binary);
    if (!f) throw BackendError("predict did not write " + out.string());
    std::unordered_map<std::string, std::string> by_id;
    std::string line;
    while (std::getline(f, line)) {
      if (text::trim(line).empty()) continue;
      try {
        const json j = json::parse(line);
        const std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        by_id[id] = j.at("label").get<std::string>();
      } catch (const json::exception& e) {
        throw BackendError(std::string("malformed prediction line: ") + e.what());
      }
    }
    std::vector<std::string> labels;
    for (const Item& it : items) {
      const auto p = by_id.find(it.id);
      if (p == by_id.end()) throw BackendError("no prediction for item '" + it.id + "'");
      labels.push_back(p->second);
    }
    return labels;
  }

 private:
  std::string exe_;
  std::filesystem::path dir_;
};

std::string fold_name(std::size_t repeat, std::size_t fold) {
  return "r" + std::to_string(repeat) + "f" + std::to_string(fold);
}

json confusion_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

LabeledDataset read_dataset(std::istream& in) {
  LabeledDataset data;
  std::set<std::string> ids;
  std::set<std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    Item it;
    try {
      const json j = json::parse(line);
      it.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      it.text = j.at("text").get<std::string>();
      it.label = j.at("label").get<std::string>();
      if (j.contains("group") && !j.at("group").is_null()) {
        it.group = j.at("group").is_string() ? j.at("group").get<std::string>() : j.at("group").dump();
      }
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    }
    if (it.label.empty()) throw InputError(where + "empty label");
    if (!ids.insert(it.id).second) throw InputError(where + "duplicate item id '" + it.id + "'");
    labels.insert(it.label);
    data.items.push_back(std::move(it));
  }
  data.label_set.assign(labels.begin(), labels.end());
  return data;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path.string());
  return read_dataset(in);
}

std::string item_to_json(const Item& item) {
  json j{{"id", item.id}, {"text", item.text}, {"label", item.label}};
  if (item.group) j["group"] = *item.group;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Metrics

Metrics metrics(const Confusion& c) {
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  // Harmonic mean written over counts: one rounding instead of three.
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

Metrics macro_metrics(const std::vector<Confusion>& per_label) {
  if (per_label.size() < 2) throw InputError("macro metrics need at least two labels");
  Metrics sum;
  for (const Confusion& c : per_label) {
    const Metrics m = metrics(c);
    sum.precision += m.precision;
    sum.recall += m.recall;
    sum.f1 += m.f1;
  }
  const double n = static_cast<double>(per_label.size());
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

std::map<std::string, Confusion> confusions(const std::vector<std::string>& gold,
                                            const std::vector<std::string>& predicted,
                                            const std::vector<std::string>& label_set) {
  if (gold.size() != predicted.size()) throw InputError("gold and predicted label counts differ");
  std::map<std::string, Confusion> out;
  for (const std::string& label : label_set) {
    Confusion c;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == label;
      const bool p = predicted[i] == label;
      if (g && p) ++c.tp;
      else if (!g && p) ++c.fp;
      else if (g && !p) ++c.fn;
      else ++c.tn;
    }
    out[label] = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<Split> lopo_folds(const LabeledDataset& data) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    const Item& it = data.items[i];
    if (!it.group) throw InputError("item '" + it.id + "' has no group; leave-one-project-out needs one");
    groups[*it.group].push_back(i);
  }
  if (groups.size() < 2) throw InputError("leave-one-project-out needs at least two groups");
  std::vector<Split> out;
  std::size_t k = 0;
  for (const auto& [group, members] : groups) {
    Split s;
    s.fold_id = group;
    s.fold = k++;
    s.test = members;
    for (std::size_t i = 0; i < data.items.size(); ++i) {
      if (*data.items[i].group != group) s.train.push_back(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Split> repeated_cv_folds(const LabeledDataset& data, std::size_t repeats, std::size_t folds,
                                     std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least two folds");
  if (repeats < 1) throw InputError("cross-validation needs at least one repeat");
  const std::size_t n = data.items.size();
  if (n < folds) {
    throw InputError("dataset has " + std::to_string(n) + " items, fewer than " + std::to_string(folds) + " folds");
  }
  std::map<std::string, std::size_t> per_label;
  for (const Item& it : data.items) ++per_label[it.label];
  for (const auto& [label, count] : per_label) {
    if (count < folds) {
      throw InputError("cannot stratify: label '" + label + "' has " + std::to_string(count) + " items, fewer than " +
                       std::to_string(folds) + " folds");
    }
  }

  std::vector<Split> out;
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed, r);
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.items[a].label < data.items[b].label; });
    std::vector<std::size_t> fold_of(n);
    for (std::size_t k = 0; k < n; ++k) fold_of[order[k]] = k % folds;
    for (std::size_t f = 0; f < folds; ++f) {
      Split s;
      s.repeat = r;
      s.fold = f;
      s.fold_id = fold_name(r, f);
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? s.test : s.train).push_back(i);
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backends

std::vector<std::string> unigram_words(std::string_view input) {
  std::vector<std::string> out;
  for (std::string& w : wordpiece::basic_split(input, false)) {
    bool alnum = false;
    for (char32_t cp : text::decode(w)) {
      if (text::is_alnum(cp)) {
        alnum = true;
        break;
      }
    }
    if (alnum) out.push_back(std::move(w));
  }
  return out;
}

std::unique_ptr<TrainedModel> MajorityBackend::train(const std::vector<Item>& train, const std::vector<Item>&,
                                                     const std::vector<std::string>&) const {
  if (train.empty()) throw BackendError("majority baseline needs training items");
  std::map<std::string, std::size_t> counts;
  for (const Item& it : train) ++counts[it.label];
  const auto best = std::max_element(counts.begin(), counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  return std::make_unique<ConstantModel>(best->first);
}

std::unique_ptr<TrainedModel> UnigramCountBackend::train(const std::vector<Item>& train, const std::vector<Item>&,
                                                         const std::vector<std::string>&) const {
  if (train.empty()) throw BackendError("unigram baseline needs training items");
  return std::make_unique<NaiveBayesModel>(train);
}

CommandBackend::CommandBackend(std::string executable) : executable_(std::move(executable)) {
  if (executable_.empty()) throw ConfigError("empty classifier command");
}

std::unique_ptr<TrainedModel> CommandBackend::train(const std::vector<Item>& train, const std::vector<Item>& validation,
                                                    const std::vector<std::string>&) const {
  const auto dir = make_temp_dir();
  auto model = std::make_unique<CommandModel>(executable_, dir);
  write_items(dir / "train.jsonl", train, true);
  write_items(dir / "val.jsonl", validation, true);
  std::filesystem::create_directories(dir / "model");
  run_command({executable_, "train", "--train", (dir / "train.jsonl").string(), "--val", (dir / "val.jsonl").string(),
               "--model-dir", (dir / "model").string()},
              dir / "log.txt");
  return model;
}

std::unique_ptr<ClassifierBackend> make_backend(std::string_view spec) {
  if (spec == "majority") return std::make_unique<MajorityBackend>();
  if (spec == "unigram" || spec == "unigram_count") return std::make_unique<UnigramCountBackend>();
  if (spec.starts_with("cmd:")) return std::make_unique<CommandBackend>(std::string(spec.substr(4)));
  throw ConfigError("unknown classifier backend '" + std::string(spec) + "' (expected majority, unigram or cmd:<exe>)");
}

// ---------------------------------------------------------------------------
// Running

Scheme parse_scheme(std::string_view name) {
  if (name == "lopo") return Scheme::lopo;
  if (name == "10x10" || name == "cv" || name == "repeated_cv") return Scheme::repeated_cv;
  throw ConfigError("unknown evaluation scheme '" + std::string(name) + "' (expected lopo or 10x10)");
}

std::string_view to_string(Scheme scheme) { return scheme == Scheme::lopo ? "lopo" : "10x10"; }

void score_fold(FoldResult& fold, const std::vector<std::string>& label_set,
                const std::optional<std::string>& positive_label) {
  std::vector<std::string> gold;
  std::vector<std::string> pred;
  for (const auto& p : fold.predictions) {
    gold.push_back(p.label);
    pred.push_back(p.predicted);
  }
  fold.per_label = confusions(gold, pred, label_set);
  std::vector<Confusion> all;
  for (const auto& [label, c] : fold.per_label) all.push_back(c);
  const Metrics macro = all.size() >= 2 ? macro_metrics(all) : metrics(all.empty() ? Confusion{} : all.front());
  fold.macro_precision = macro.precision;
  fold.macro_recall = macro.recall;
  fold.macro_f1 = macro.f1;
  if (positive_label) {
    const Metrics m = metrics(fold.per_label.at(*positive_label));
    fold.precision = m.precision;
    fold.recall = m.recall;
    fold.f1 = m.f1;
  } else {
    fold.precision = macro.precision;
    fold.recall = macro.recall;
    fold.f1 = macro.f1;
  }
}

std::vector<FoldResult> run_eval(const LabeledDataset& data, const ClassifierBackend& backend,
                                 const EvalOptions& options) {
  if (data.label_set.size() < 2) throw InputError("evaluation needs at least two labels");
  if (data.positive_label &&
      std::find(data.label_set.begin(), data.label_set.end(), *data.positive_label) == data.label_set.end()) {
    throw InputError("positive label '" + *data.positive_label + "' does not occur in the dataset");
  }
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
  const std::vector<Split> splits = options.scheme == Scheme::lopo
                                        ? lopo_folds(data)
                                        : repeated_cv_folds(data, options.repeats, options.folds, options.seed);
  std::vector<FoldResult> results(splits.size());

  auto run_split = [&](std::size_t s) {
    const Split& split = splits[s];
    FoldResult& fr = results[s];
    fr.fold_id = split.fold_id;
    fr.repeat = split.repeat;
    fr.fold = split.fold;
    std::vector<std::size_t> train = split.train;
    Rng rng(options.seed ^ 0x5EB0E7A1ull, s);
    rng.shuffle(train);
    const auto n_val = static_cast<std::size_t>(
        std::llround(options.validation_fraction * static_cast<double>(train.size())));
    std::vector<std::size_t> val(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.erase(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    fr.train_size = train.size();
    fr.validation_size = val.size();
    fr.test_size = split.test.size();
    try {
      const std::vector<Item> test_items = gather(data, split.test);
      const auto model = backend.train(gather(data, train), gather(data, val), data.label_set);
      const std::vector<std::string> predicted = model->predict(test_items);
      if (predicted.size() != test_items.size()) {
        throw BackendError("backend returned " + std::to_string(predicted.size()) + " labels for " +
                           std::to_string(test_items.size()) + " items");
      }
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (std::find(data.label_set.begin(), data.label_set.end(), predicted[i]) == data.label_set.end()) {
          throw BackendError("backend predicted unknown label '" + predicted[i] + "'");
        }
        fr.predictions.push_back({test_items[i].id, test_items[i].label, predicted[i]});
      }
      score_fold(fr, data.label_set, data.positive_label);
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.error = e.what();
      fr.predictions.clear();
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options.max_parallel, 1), splits.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < splits.size(); ++s) run_split(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < splits.size(); s = next++) run_split(s);
      });
    }
  }
  return results;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double fold_metric(const FoldResult& fold, std::string_view metric) {
  if (metric == "f1") return fold.f1;
  if (metric == "precision") return fold.precision;
  if (metric == "recall") return fold.recall;
  if (metric == "macro_f1") return fold.macro_f1;
  if (metric == "macro_precision") return fold.macro_precision;
  if (metric == "macro_recall") return fold.macro_recall;
  throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

std::string results_to_json(const EvalRun& run) {
  json folds = json::array();
  std::vector<double> f1s;
  std::size_t failed = 0;
  for (const FoldResult& f : run.folds) {
    json per_label = json::object();
    for (const auto& [label, c] : f.per_label) per_label[label] = confusion_json(c);
    json preds = json::array();
    for (const auto& p : f.predictions) preds.push_back({{"id", p.id}, {"label", p.label}, {"predicted", p.predicted}});
    folds.push_back({{"fold_id", f.fold_id},
                     {"repeat", f.repeat},
                     {"fold", f.fold},
                     {"failed", f.failed},
                     {"error", f.error},
                     {"train_size", f.train_size},
                     {"validation_size", f.validation_size},
                     {"test_size", f.test_size},
                     {"per_label", per_label},
                     {"precision", f.precision},
                     {"recall", f.recall},
                     {"f1", f.f1},
                     {"macro_precision", f.macro_precision},
                     {"macro_recall", f.macro_recall},
                     {"macro_f1", f.macro_f1},
                     {"predictions", preds}});
    if (f.failed) {
      ++failed;
    } else {
      f1s.push_back(f.f1);
    }
  }
  json j{{"scheme", run.scheme},
         {"backend", run.backend},
         {"seed", run.seed},
         {"label_set", run.label_set},
         {"positive_label", run.positive_label ? json(*run.positive_label) : json(nullptr)},
         {"folds", folds},
         {"summary", {{"folds", run.folds.size()}, {"failed_folds", failed}, {"median_f1", median(f1s)}}}};
  return j.dump(2);
}

EvalRun results_from_json(std::string_view json_text) {
  EvalRun run;
  try {
    const json j = json::parse(json_text);
    run.scheme = j.value("scheme", std::string());
    run.backend = j.value("backend", std::string());
    run.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("label_set")) run.label_set = j.at("label_set").get<std::vector<std::string>>();
    if (j.contains("positive_label") && j.at("positive_label").is_string()) {
      run.positive_label = j.at("positive_label").get<std::string>();
    }
    for (const auto& f : j.at("folds")) {
      FoldResult fr;
      fr.fold_id = f.at("fold_id").get<std::string>();
      fr.repeat = f.value("repeat", std::size_t{0});
      fr.fold = f.value("fold", std::size_t{0});
      fr.failed = f.value("failed", false);
      fr.error = f.value("error", std::string());
      fr.train_size = f.value("train_size", std::size_t{0});
      fr.validation_size = f.value("validation_size", std::size_t{0});
      fr.test_size = f.value("test_size", std::size_t{0});
      if (f.contains("per_label")) {
        for (const auto& [label, c] : f.at("per_label").items()) {
          fr.per_label[label] = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                                 c.at("fn").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>()};
        }
      }
      fr.precision = f.value("precision", 0.0);
      fr.recall = f.value("recall", 0.0);
      fr.f1 = f.value("f1", 0.0);
      fr.macro_precision = f.value("macro_precision", 0.0);
      fr.macro_recall = f.value("macro_recall", 0.0);
      fr.macro_f1 = f.value("macro_f1", 0.0);
      if (f.contains("predictions")) {
        for (const auto& p : f.at("predictions")) {
          fr.predictions.push_back(
              {p.at("id").get<std::string>(), p.at("label").get<std::string>(), p.at("predicted").get<std::string>()});
        }
      }
      run.folds.push_back(std::move(fr));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed evaluation results: ") + e.what());
  }
  return run;
}

}  // namespace sebench::eval
