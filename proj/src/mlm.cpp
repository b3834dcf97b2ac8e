#include "sebench/mlm.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sebench/corpus.hpp"
#include "sebench/text.hpp"
#include "sebench/wordpiece.hpp"

namespace sebench::mlm {

using json = nlohmann::json;

namespace {

constexpr std::string_view kMaskToken = "[MASK]";
constexpr std::array<Category, 3> kCategories{Category::positive, Category::negative, Category::neutral};

json predictions_json(const std::vector<Prediction>& preds) {
  json arr = json::array();
  for (const auto& p : preds) arr.push_back({{"token", p.token}, {"prob", p.prob}});
  return arr;
}

std::vector<Prediction> predictions_from(const json& arr) {
  if (!arr.is_array()) throw InputError("\"predictions\" must be an array");
  std::vector<Prediction> out;
  for (const auto& p : arr) {
    if (!p.is_object() || !p.contains("token") || !p.contains("prob") || !p.at("token").is_string() ||
        !p.at("prob").is_number()) {
      throw InputError("each prediction needs a string \"token\" and a numeric \"prob\"");
    }
    out.push_back({p.at("token").get<std::string>(), p.at("prob").get<double>()});
  }
  return out;
}

MaskedExample example_from(const json& j) {
  if (!j.is_object()) throw InputError("benchmark example must be an object");
  MaskedExample ex;
  try {
    ex.id = j.at("id").get<int>();
    ex.sentence = j.at("sentence").get<std::string>();
    ex.category = parse_category(j.at("category").get<std::string>());
    if (j.contains("expectation")) ex.expectation = j.at("expectation").get<std::vector<std::string>>();
    if (j.contains("expectation_note")) ex.expectation_note = j.at("expectation_note").get<std::string>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed benchmark example: ") + e.what());
  }
  try {
    require_single_mask(ex.sentence);
  } catch (const InputError& e) {
    throw InputError("example " + std::to_string(ex.id) + ": " + e.what());
  }
  return ex;
}

json example_json(const MaskedExample& ex) {
  return {{"id", ex.id},
          {"sentence", ex.sentence},
          {"category", to_string(ex.category)},
          {"expectation", ex.expectation},
          {"expectation_note", ex.expectation_note}};
}

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out.push_back(c);
  }
  return out;
}

std::string format_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", p);
  return buf;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::positive:
      return "positive";
    case Category::negative:
      return "negative";
    case Category::neutral:
      return "neutral";
  }
  return "neutral";
}

Category parse_category(std::string_view name) {
  for (Category c : kCategories) {
    if (to_string(c) == name) return c;
  }
  throw InputError("unknown example category '" + std::string(name) + "'");
}

std::size_t count_masks(std::string_view sentence) {
  std::size_t n = 0;
  for (std::size_t pos = sentence.find(kMaskToken); pos != std::string_view::npos;
       pos = sentence.find(kMaskToken, pos + kMaskToken.size())) {
    ++n;
  }
  return n;
}

void require_single_mask(std::string_view sentence) {
  const std::size_t n = count_masks(sentence);
  if (n != 1) throw InputError("sentence must contain exactly one [MASK], found " + std::to_string(n));
}

std::vector<MaskedExample> parse_examples(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("benchmark file is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw InputError("benchmark file must hold a JSON list of examples");
  std::vector<MaskedExample> out;
  std::set<int> ids;
  for (const auto& item : j) {
    MaskedExample ex = example_from(item);
    if (!ids.insert(ex.id).second) throw InputError("duplicate example id " + std::to_string(ex.id));
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<MaskedExample> load_examples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open benchmark file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_examples(ss.str());
}

std::string examples_to_json(const std::vector<MaskedExample>& examples) {
  json arr = json::array();
  for (const auto& ex : examples) arr.push_back(example_json(ex));
  return arr.dump(2);
}

// ---------------------------------------------------------------------------
// Prediction sets

std::string prediction_set_to_json(const PredictionSet& set) {
  json j{{"model_name", set.model_name}, {"example_id", set.example_id}, {"predictions", predictions_json(set.predictions)}};
  if (!set.warnings.empty()) j["warnings"] = set.warnings;
  return j.dump();
}

namespace {

PredictionSet prediction_set_from(const json& j) {
  if (!j.is_object()) throw InputError("prediction set must be a JSON object");
  PredictionSet set;
  try {
    if (j.contains("model_name")) set.model_name = j.at("model_name").get<std::string>();
    if (j.contains("example_id")) set.example_id = j.at("example_id").get<int>();
    if (j.contains("warnings")) set.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed prediction set: ") + e.what());
  }
  if (!j.contains("predictions")) throw InputError("prediction set has no \"predictions\"");
  set.predictions = predictions_from(j.at("predictions"));
  return set;
}

}  // namespace

PredictionSet prediction_set_from_json(std::string_view json_text) {
  try {
    return prediction_set_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw InputError(std::string("prediction set is not valid JSON: ") + e.what());
  }
}

std::vector<PredictionSet> parse_prediction_sets(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("prediction file is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw InputError("prediction file must hold a JSON list");
  std::vector<PredictionSet> out;
  for (const auto& item : j) out.push_back(prediction_set_from(item));
  return out;
}

void normalize_predictions(PredictionSet& set, std::size_t top_k) {
  for (const auto& p : set.predictions) {
    if (!(p.prob >= 0.0 && p.prob <= 1.0)) {
      throw BackendError("probability " + std::to_string(p.prob) + " for '" + p.token + "' is outside [0, 1]");
    }
  }
  auto order = [](const Prediction& a, const Prediction& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.token < b.token;
  };
  const bool sorted_by_prob = std::is_sorted(set.predictions.begin(), set.predictions.end(),
                                             [](const Prediction& a, const Prediction& b) { return a.prob > b.prob; });
  if (!sorted_by_prob) {
    std::stable_sort(set.predictions.begin(), set.predictions.end(), order);
    set.warnings.push_back("predictions were not sorted by probability; re-sorted");
  }
  if (set.predictions.size() > top_k) {
    set.warnings.push_back("backend returned " + std::to_string(set.predictions.size()) +
                           " predictions; kept the top " + std::to_string(top_k));
    set.predictions.resize(top_k);
  }
}

// ---------------------------------------------------------------------------
// Baseline backend

BaselineBackend::BaselineBackend(std::string name, const std::vector<std::string>& lines) : name_(std::move(name)) {
  for (const std::string& line : lines) {
    for (const std::string& sentence : corpus::split_sentences(line)) {
      std::string prev = "<s>";
      for (std::string& w : wordpiece::basic_split(sentence, false)) {
        ++unigrams_[w];
        ++bigrams_[prev][w];
        prev = std::move(w);
      }
    }
  }
  if (unigrams_.empty()) throw InputError("baseline backend needs a nonempty corpus");
}

PredictionSet BaselineBackend::predict(std::string_view sentence, std::size_t top_k) const {
  require_single_mask(sentence);
  const std::vector<std::string> words = wordpiece::basic_split(sentence, false);
  const auto mask = std::find(words.begin(), words.end(), kMaskToken);
  const std::string prev = mask == words.begin() ? "<s>" : *(mask - 1);
  const auto ctx = bigrams_.find(prev);
  const Counts& counts = ctx != bigrams_.end() ? ctx->second : unigrams_;
  std::uint64_t total = 0;
  for (const auto& [w, c] : counts) total += c;

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);

  PredictionSet set;
  set.model_name = name_;
  for (const auto& [w, c] : ranked) {
    set.predictions.push_back({w, static_cast<double>(c) / static_cast<double>(total)});
  }
  return set;
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(std::string name, std::string url, std::chrono::milliseconds timeout)
    : name_(std::move(name)), timeout_(timeout) {
  constexpr std::string_view scheme = "http://";
  if (!std::string_view(url).starts_with(scheme)) {
    throw ConfigError("backend URL must start with http:// (got '" + url + "')");
  }
  const std::size_t slash = url.find('/', scheme.size());
  origin_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  if (origin_.size() == scheme.size()) throw ConfigError("backend URL has no host: '" + url + "'");
  if (path_ == "/") path_ = "/predict";
}

PredictionSet HttpBackend::predict(std::string_view sentence, std::size_t top_k) const {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const json request{{"sentence", sentence}, {"top_k", top_k}};
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw BackendError(name_ + ": request to " + origin_ + path_ + " failed (" + httplib::to_string(res.error()) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(name_ + ": HTTP " + std::to_string(res->status) + " from " + origin_ + path_ + ": " +
                       res->body.substr(0, 200));
  }
  PredictionSet set;
  try {
    const json body = json::parse(res->body);
    if (!body.is_object() || !body.contains("predictions")) throw InputError("response has no \"predictions\"");
    set.predictions = predictions_from(body.at("predictions"));
  } catch (const json::exception& e) {
    throw BackendError(name_ + ": malformed response body (" + e.what() + ")");
  } catch (const InputError& e) {
    throw BackendError(name_ + ": malformed response body (" + e.what() + ")");
  }
  set.model_name = name_;
  normalize_predictions(set, top_k);
  return set;
}

// ---------------------------------------------------------------------------
// Benchmark

double CategoryScore::hit_at_1() const {
  return scored == 0 ? 0.0 : static_cast<double>(hits_at_1) / static_cast<double>(scored);
}

double CategoryScore::hit_at_k() const {
  return scored == 0 ? 0.0 : static_cast<double>(hits_at_k) / static_cast<double>(scored);
}

const Outcome* BenchmarkResult::find(int example_id, std::string_view backend) const {
  for (const auto& o : outcomes) {
    if (o.example_id == example_id && o.backend == backend) return &o;
  }
  return nullptr;
}

bool hit(const std::vector<std::string>& expectation, const std::vector<Prediction>& predictions, std::size_t k) {
  for (std::size_t i = 0; i < predictions.size() && i < k; ++i) {
    const std::string got = text::to_lower(predictions[i].token);
    for (const auto& want : expectation) {
      if (text::to_lower(want) == got) return true;
    }
  }
  return false;
}

std::vector<CategoryScore> score(const BenchmarkResult& result) {
  std::vector<CategoryScore> scores;
  for (const std::string& backend : result.backends) {
    for (Category cat : kCategories) {
      CategoryScore s;
      s.backend = backend;
      s.category = cat;
      for (const auto& ex : result.examples) {
        if (ex.category != cat) continue;
        const Outcome* o = result.find(ex.id, backend);
        if (ex.expectation.empty()) {
          ++s.unscored;
        } else if (!o || !o->predictions) {
          ++s.failed;
        } else {
          ++s.scored;
          if (hit(ex.expectation, o->predictions->predictions, 1)) ++s.hits_at_1;
          if (hit(ex.expectation, o->predictions->predictions, result.top_k)) ++s.hits_at_k;
        }
      }
      scores.push_back(s);
    }
  }
  return scores;
}

BenchmarkResult run_benchmark(const std::vector<MaskedExample>& examples,
                              const std::vector<std::shared_ptr<const MlmBackend>>& backends,
                              const RunOptions& options) {
  if (options.top_k < 1) throw ConfigError("top_k must be at least 1");
  if (options.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  BenchmarkResult result;
  result.top_k = options.top_k;
  result.examples = examples;
  std::sort(result.examples.begin(), result.examples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < result.examples.size(); ++i) {
    require_single_mask(result.examples[i].sentence);
    if (i && result.examples[i].id == result.examples[i - 1].id) {
      throw InputError("duplicate example id " + std::to_string(result.examples[i].id));
    }
  }
  std::vector<std::shared_ptr<const MlmBackend>> sorted = backends;
  for (const auto& b : sorted) {
    if (!b) throw ConfigError("null backend");
  }
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a->name() < b->name(); });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i && sorted[i]->name() == sorted[i - 1]->name()) throw ConfigError("duplicate backend name '" + sorted[i]->name() + "'");
    result.backends.push_back(sorted[i]->name());
  }

  const std::size_t nb = sorted.size();
  const std::size_t tasks = result.examples.size() * nb;
  result.outcomes.resize(tasks);
  auto run_task = [&](std::size_t t) {
    const MaskedExample& ex = result.examples[t / nb];
    const MlmBackend& backend = *sorted[t % nb];
    Outcome& o = result.outcomes[t];
    o.example_id = ex.id;
    o.backend = backend.name();
    try {
      PredictionSet set = backend.predict(ex.sentence, options.top_k);
      set.model_name = backend.name();
      set.example_id = ex.id;
      normalize_predictions(set, options.top_k);
      o.predictions = std::move(set);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  };
  const std::size_t workers = std::min(options.max_in_flight, tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) run_task(t);
      });
    }
  }
  result.scores = score(result);
  return result;
}

// ---------------------------------------------------------------------------
// Reports

std::string render_report(const BenchmarkResult& result, ReportFormat format) {
  if (result.examples.empty() || result.backends.empty()) {
    throw InputError("cannot render an empty benchmark result");
  }
  const std::vector<CategoryScore> scores = score(result);

  if (format == ReportFormat::json) {
    json rows = json::array();
    for (const auto& ex : result.examples) {
      json row = example_json(ex);
      json per_backend = json::object();
      for (const auto& b : result.backends) {
        const Outcome* o = result.find(ex.id, b);
        if (o && o->predictions) {
          json cell{{"predictions", predictions_json(o->predictions->predictions)}};
          if (!o->predictions->warnings.empty()) cell["warnings"] = o->predictions->warnings;
          per_backend[b] = cell;
        } else {
          per_backend[b] = {{"error", o ? o->error : std::string("no outcome recorded")}};
        }
      }
      row["results"] = per_backend;
      rows.push_back(row);
    }
    json summary = json::array();
    for (const auto& s : scores) {
      summary.push_back({{"backend", s.backend},
                         {"category", to_string(s.category)},
                         {"scored", s.scored},
                         {"unscored", s.unscored},
                         {"failed", s.failed},
                         {"hit_at_1", s.hit_at_1()},
                         {"hit_at_k", s.hit_at_k()}});
    }
    return json{{"top_k", result.top_k}, {"backends", result.backends}, {"rows", rows}, {"summary", summary}}.dump(2);
  }

  std::ostringstream out;
  out << "# Masked token predictions (top " << result.top_k << ")\n";
  for (Category cat : kCategories) {
    const bool any = std::any_of(result.examples.begin(), result.examples.end(),
                                 [&](const auto& ex) { return ex.category == cat; });
    if (!any) continue;
    std::string title(to_string(cat));
    title[0] = static_cast<char>(title[0] - 'a' + 'A');
    out << "\n## " << title << " examples\n\n| # | Sentence | Expected |";
    for (const auto& b : result.backends) out << ' ' << md_escape(b) << " prediction | " << md_escape(b) << " prob |";
    out << "\n|---|---|---|";
    for (std::size_t i = 0; i < result.backends.size(); ++i) out << "---|---|";
    out << '\n';
    for (const auto& ex : result.examples) {
      if (ex.category != cat) continue;
      const std::string expected = ex.expectation.empty() ? "(" + ex.expectation_note + ")" : text::join(ex.expectation, ", ");
      out << "| " << ex.id << " | " << md_escape(ex.sentence) << " | " << md_escape(expected) << " |";
      for (const auto& b : result.backends) {
        const Outcome* o = result.find(ex.id, b);
        if (o && o->predictions) {
          std::vector<std::string> toks;
          std::vector<std::string> probs;
          for (const auto& p : o->predictions->predictions) {
            toks.push_back(md_escape(p.token));
            probs.push_back(format_prob(p.prob));
          }
          out << ' ' << text::join(toks, "<br>") << " | " << text::join(probs, "<br>") << " |";
        } else {
          out << " FAILED: " << md_escape(o ? o->error : "no outcome recorded") << " | |";
        }
      }
      out << '\n';
    }
  }
  out << "\n## Summary\n\n| Backend | Category | Scored | Unscored | Failed | hit@1 | hit@" << result.top_k << " |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& s : scores) {
    out << "| " << md_escape(s.backend) << " | " << to_string(s.category) << " | " << s.scored << " | " << s.unscored
        << " | " << s.failed << " | " << format_prob(s.hit_at_1()) << " | " << format_prob(s.hit_at_k()) << " |\n";
  }
  return out.str();
}

BenchmarkResult result_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("benchmark result is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("rows") || !j.at("rows").is_array()) {
    throw InputError("benchmark result needs a \"rows\" list");
  }
  BenchmarkResult r;
  try {
    r.top_k = j.value("top_k", std::size_t{5});
    std::set<std::string> backends;
    if (j.contains("backends")) {
      for (const auto& b : j.at("backends")) backends.insert(b.get<std::string>());
    }
    for (const auto& row : j.at("rows")) {
      MaskedExample ex = example_from(row);
      if (row.contains("results")) {
        for (const auto& [name, cell] : row.at("results").items()) {
          backends.insert(name);
          Outcome o;
          o.example_id = ex.id;
          o.backend = name;
          if (cell.contains("predictions")) {
            PredictionSet set;
            set.model_name = name;
            set.example_id = ex.id;
            set.predictions = predictions_from(cell.at("predictions"));
            if (cell.contains("warnings")) set.warnings = cell.at("warnings").get<std::vector<std::string>>();
            o.predictions = std::move(set);
          } else {
            o.error = cell.value("error", std::string("unknown failure"));
          }
          r.outcomes.push_back(std::move(o));
        }
      }
      r.examples.push_back(std::move(ex));
    }
    r.backends.assign(backends.begin(), backends.end());
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed benchmark result: ") + e.what());
  }
  std::sort(r.examples.begin(), r.examples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(r.outcomes.begin(), r.outcomes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.example_id, a.backend) < std::tie(b.example_id, b.backend);
  });
  r.scores = score(r);
  return r;
}

}  // namespace sebench::mlm
