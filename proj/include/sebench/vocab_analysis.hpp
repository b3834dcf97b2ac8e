#pragma once

// Vocabulary comparisons: overlap, coverage after uncasing, ## piece counts
// and cross-tokenization of words one vocabulary has and the other lacks.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sebench/wordpiece.hpp"

namespace sebench::vocab_analysis {

struct OverlapReport {
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t intersection = 0;
  double overlap_pct = 0.0;
  std::size_t hash_piece_count_a = 0;
  std::size_t hash_piece_count_b = 0;
  std::vector<std::string> only_in_a;  // sorted
  std::vector<std::string> only_in_b;  // sorted
};

struct CoverageReport {
  double pct_of_b_in_a = 0.0;  // intersection / |b'|
  double pct_of_a_in_b = 0.0;  // intersection / |a|
  std::size_t uncased_unique_b = 0;  // |b'|, after optional lowercasing and deduplication
  std::size_t intersection = 0;
};

struct CrossTokenization {
  std::string word;
  std::vector<std::string> tokenized_by_other;
};

// Set overlap of two equally sized vocabularies, specials included.
// Throws InputError for unequal sizes (use coverage()).
OverlapReport overlap(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b);

CoverageReport coverage(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b, bool uncase_b);

std::size_t count_continuation_pieces(const wordpiece::Vocabulary& v);

// Entries of a that do not start with ## and consist of letters/digits only.
bool is_whole_word(const std::string& token);

// Whole-word entries of a missing from b, segmented by tokenizer_b; sorted by word.
std::vector<CrossTokenization> cross_tokenize_oov(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b,
                                                  const wordpiece::Tokenizer& tokenizer_b);

// Everything analyze-vocab reports. Overlap is absent for unequal sizes.
struct AnalysisReport {
  std::optional<OverlapReport> overlap;
  CoverageReport coverage;
  std::size_t continuation_a = 0;
  std::size_t continuation_b = 0;
  std::vector<CrossTokenization> a_not_in_b;
  std::vector<CrossTokenization> b_not_in_a;
};

AnalysisReport analyze(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b, bool uncase_b);

// Token lists are capped at `example_limit` entries each.
std::string to_json(const AnalysisReport& report, std::size_t example_limit);

// Two-column table of example words and their pieces under the other vocabulary.
std::string render_markdown(const std::vector<CrossTokenization>& a_not_in_b,
                            const std::vector<CrossTokenization>& b_not_in_a, std::size_t rows);

}  // namespace sebench::vocab_analysis
