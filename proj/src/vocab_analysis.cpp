#include "sebench/vocab_analysis.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "sebench/text.hpp"

namespace sebench::vocab_analysis {

using json = nlohmann::json;

namespace {

std::unordered_set<std::string_view> as_set(const wordpiece::Vocabulary& v) {
  return {v.tokens().begin(), v.tokens().end()};
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

json cross_json(const std::vector<CrossTokenization>& items, std::size_t limit) {
  json arr = json::array();
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
    arr.push_back({{"word", items[i].word}, {"pieces", items[i].tokenized_by_other}});
  }
  return arr;
}

json capped(const std::vector<std::string>& items, std::size_t limit) {
  return std::vector<std::string>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(std::min(limit, items.size())));
}

}  // namespace

OverlapReport overlap(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b) {
  if (a.size() != b.size()) {
    throw InputError("overlap needs vocabularies of equal size (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + "); use coverage for unequal sizes");
  }
  const auto sa = as_set(a);
  const auto sb = as_set(b);
  OverlapReport r;
  r.size_a = a.size();
  r.size_b = b.size();
  for (const std::string& t : a.tokens()) {
    if (sb.contains(t)) {
      ++r.intersection;
    } else {
      r.only_in_a.push_back(t);
    }
  }
  for (const std::string& t : b.tokens()) {
    if (!sa.contains(t)) r.only_in_b.push_back(t);
  }
  std::sort(r.only_in_a.begin(), r.only_in_a.end());
  std::sort(r.only_in_b.begin(), r.only_in_b.end());
  r.overlap_pct = percent(r.intersection, a.size());
  r.hash_piece_count_a = count_continuation_pieces(a);
  r.hash_piece_count_b = count_continuation_pieces(b);
  return r;
}

CoverageReport coverage(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b, bool uncase_b) {
  std::unordered_set<std::string> b_prime;
  for (const std::string& t : b.tokens()) b_prime.insert(uncase_b ? text::to_lower(t) : t);
  std::size_t inter = 0;
  for (const std::string& t : a.tokens()) {
    if (b_prime.contains(t)) ++inter;
  }
  CoverageReport r;
  r.uncased_unique_b = b_prime.size();
  r.intersection = inter;
  r.pct_of_b_in_a = percent(inter, b_prime.size());
  r.pct_of_a_in_b = percent(inter, a.size());
  return r;
}

std::size_t count_continuation_pieces(const wordpiece::Vocabulary& v) {
  return static_cast<std::size_t>(std::count_if(v.tokens().begin(), v.tokens().end(),
                                                [](const std::string& t) { return wordpiece::is_continuation(t); }));
}

bool is_whole_word(const std::string& token) {
  if (token.empty() || wordpiece::is_continuation(token)) return false;
  for (char32_t cp : text::decode(token)) {
    if (!text::is_alnum(cp)) return false;
  }
  return true;
}

std::vector<CrossTokenization> cross_tokenize_oov(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b,
                                                  const wordpiece::Tokenizer& tokenizer_b) {
  std::vector<CrossTokenization> out;
  for (const std::string& t : a.tokens()) {
    if (!is_whole_word(t) || b.contains(t)) continue;
    out.push_back({t, tokenizer_b.tokenize_word(t)});
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.word < y.word; });
  return out;
}

AnalysisReport analyze(const wordpiece::Vocabulary& a, const wordpiece::Vocabulary& b, bool uncase_b) {
  AnalysisReport r;
  if (a.size() == b.size()) r.overlap = overlap(a, b);
  r.coverage = coverage(a, b, uncase_b);
  r.continuation_a = count_continuation_pieces(a);
  r.continuation_b = count_continuation_pieces(b);
  const wordpiece::Tokenizer tok_a(a);
  const wordpiece::Tokenizer tok_b(b);
  r.a_not_in_b = cross_tokenize_oov(a, b, tok_b);
  r.b_not_in_a = cross_tokenize_oov(b, a, tok_a);
  return r;
}

std::string to_json(const AnalysisReport& r, std::size_t example_limit) {
  json j;
  if (r.overlap) {
    const OverlapReport& o = *r.overlap;
    j["overlap"] = {
        {"size_a", o.size_a},
        {"size_b", o.size_b},
        {"intersection", o.intersection},
        {"overlap_pct", o.overlap_pct},
        {"hash_piece_count_a", o.hash_piece_count_a},
        {"hash_piece_count_b", o.hash_piece_count_b},
        {"only_in_a_count", o.only_in_a.size()},
        {"only_in_b_count", o.only_in_b.size()},
        {"only_in_a", capped(o.only_in_a, example_limit)},
        {"only_in_b", capped(o.only_in_b, example_limit)},
    };
  } else {
    j["overlap"] = nullptr;
  }
  j["coverage"] = {
      {"pct_of_b_in_a", r.coverage.pct_of_b_in_a},
      {"pct_of_a_in_b", r.coverage.pct_of_a_in_b},
      {"uncased_unique_b", r.coverage.uncased_unique_b},
      {"intersection", r.coverage.intersection},
  };
  j["continuation_pieces"] = {{"a", r.continuation_a}, {"b", r.continuation_b}};
  j["a_not_in_b_count"] = r.a_not_in_b.size();
  j["b_not_in_a_count"] = r.b_not_in_a.size();
  j["a_not_in_b"] = cross_json(r.a_not_in_b, example_limit);
  j["b_not_in_a"] = cross_json(r.b_not_in_a, example_limit);
  return j.dump(2);
}

std::string render_markdown(const std::vector<CrossTokenization>& a_not_in_b,
                            const std::vector<CrossTokenization>& b_not_in_a, std::size_t rows) {
  auto cell = [](const CrossTokenization& c) {
    return c.word + " → " + text::join(c.tokenized_by_other, " ");
  };
  std::ostringstream out;
  out << "| in A, not in B (B pieces) | in B, not in A (A pieces) |\n";
  out << "|---|---|\n";
  const std::size_t n = std::min(rows, std::max(a_not_in_b.size(), b_not_in_a.size()));
  for (std::size_t i = 0; i < n; ++i) {
    out << "| " << (i < a_not_in_b.size() ? cell(a_not_in_b[i]) : "") << " | "
        << (i < b_not_in_a.size() ? cell(b_not_in_a[i]) : "") << " |\n";
  }
  return out.str();
}

}  // namespace sebench::vocab_analysis
