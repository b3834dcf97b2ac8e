#pragma once

// Corpus ingestion and the eight-step cleaning pipeline with its per-source
// step matrix.

#include <array>
#include <bitset>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sebench/error.hpp"

namespace sebench::corpus {

enum class Source { github_issue, commit_message, stackoverflow, jira_issue };

inline constexpr std::array<Source, 4> kAllSources{Source::github_issue, Source::commit_message,
                                                   Source::stackoverflow, Source::jira_issue};

std::string_view to_string(Source source);
// Throws ConfigError for names outside the four known sources.
Source parse_source(std::string_view name);

enum class Step {
  basic,
  english,
  html,
  markdown,
  hashes,
  code,
  user_mentions,
  special_formatting,
};

// Canonical application order.
inline constexpr std::array<Step, 8> kStepOrder{
    Step::basic,  Step::english, Step::html,          Step::markdown,
    Step::hashes, Step::code,    Step::user_mentions, Step::special_formatting,
};

std::string_view to_string(Step step);
Step parse_step(std::string_view name);

class StepSet {
 public:
  StepSet() = default;
  StepSet(std::initializer_list<Step> steps) {
    for (Step s : steps) insert(s);
  }
  void insert(Step s) { bits_.set(static_cast<std::size_t>(s)); }
  void erase(Step s) { bits_.reset(static_cast<std::size_t>(s)); }
  bool contains(Step s) const { return bits_.test(static_cast<std::size_t>(s)); }
  bool operator==(const StepSet&) const = default;

 private:
  std::bitset<8> bits_;
};

struct Document {
  std::string id;
  Source source = Source::github_issue;
  std::string text;
  std::map<std::string, std::string> meta;
};

struct PipelineConfig {
  std::vector<Step> steps{kStepOrder.begin(), kStepOrder.end()};
  std::map<Source, StepSet> per_source;
  double english_threshold = 0.06;
  std::size_t threads = 1;

  // The published step matrix: which steps run for which source.
  static PipelineConfig defaults();
  // Reads {"steps": [...], "per_source": {"github_issue": [...]}, "english_threshold": x}.
  // Missing keys fall back to defaults().
  static PipelineConfig from_json_text(std::string_view json_text);

  // Throws ConfigError if steps are duplicated or out of canonical order, if a
  // source enables a step missing from `steps`, or if special_formatting is
  // enabled for a source that has no special-formatting rules.
  void validate() const;
  bool enabled(Source source, Step step) const;
};

enum class DropReason { non_english, empty_after_cleaning };
std::string_view to_string(DropReason reason);

struct CleanDocument {
  std::string id;
  Source source = Source::github_issue;
  std::vector<std::string> sentences;
  bool dropped = false;
  std::optional<DropReason> drop_reason;

  std::string joined_text() const;
};

// Replacement tallies gathered while cleaning; summed into the run report.
struct ReplacementCounts {
  std::size_t hashes = 0;
  std::size_t code = 0;
  std::size_t users = 0;
  std::size_t html_tags = 0;
  std::size_t markdown_markers = 0;
  std::size_t special_markup = 0;

  ReplacementCounts& operator+=(const ReplacementCounts& other);
};

class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual bool is_english(std::string_view text) const = 0;
};

// Default detector: share of English stopwords among the letter-only words.
class StopwordDetector final : public LanguageDetector {
 public:
  explicit StopwordDetector(double threshold = 0.06) : threshold_(threshold) {}
  bool is_english(std::string_view text) const override;
  double stopword_ratio(std::string_view text) const;
  double threshold() const { return threshold_; }

 private:
  double threshold_;
};

const std::vector<std::string_view>& english_stopwords();

std::string normalize_basic(std::string_view text);
bool detect_english(std::string_view text, const LanguageDetector& detector);
std::string strip_html(std::string_view text, bool mask_code = true, ReplacementCounts* counts = nullptr);
std::string strip_markdown(std::string_view text, bool mask_code = true,
                           ReplacementCounts* counts = nullptr);
std::string mask_hashes(std::string_view text, ReplacementCounts* counts = nullptr);
std::string mask_user_mentions(std::string_view text, ReplacementCounts* counts = nullptr);
// Precondition: source is commit_message or jira_issue (std::invalid_argument otherwise).
std::string strip_special_formatting(std::string_view text, Source source, bool mask_code = true,
                                     ReplacementCounts* counts = nullptr);

std::vector<std::string> split_sentences(std::string_view text);

CleanDocument run_pipeline(const Document& doc, const PipelineConfig& config,
                           const LanguageDetector& detector, ReplacementCounts* counts = nullptr);
CleanDocument run_pipeline(const Document& doc, const PipelineConfig& config);

struct PipelineReport {
  std::size_t documents = 0;
  std::size_t kept = 0;
  std::size_t dropped_non_english = 0;
  std::size_t dropped_empty = 0;
  std::size_t sentences = 0;
  std::map<Step, std::size_t> step_applications;
  ReplacementCounts replacements;

  std::string to_json() const;
};

// Cleans a whole corpus; documents may be processed on `config.threads`
// workers but results come back in input order.
std::vector<CleanDocument> run_corpus(std::span<const Document> docs, const PipelineConfig& config,
                                      const LanguageDetector& detector,
                                      PipelineReport* report = nullptr);

// JSON-lines: {"id","source","text","meta"}. Rejects duplicate ids.
std::vector<Document> read_documents(std::istream& in);
std::string document_to_json(const Document& doc);

// One sentence per line, blank line between documents. Dropped documents are skipped.
void write_corpus(std::ostream& out, std::span<const CleanDocument> docs);
// Reverse of write_corpus: documents as lists of sentences.
std::vector<std::vector<std::string>> read_corpus(std::istream& in);

}  // namespace sebench::corpus
