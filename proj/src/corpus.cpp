#include "sebench/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "sebench/text.hpp"

namespace sebench::corpus {

using json = nlohmann::json;

namespace {

constexpr std::array<std::pair<Source, std::string_view>, 4> kSourceNames{{
    {Source::github_issue, "github_issue"},
    {Source::commit_message, "commit_message"},
    {Source::stackoverflow, "stackoverflow"},
    {Source::jira_issue, "jira_issue"},
}};

constexpr std::array<std::pair<Step, std::string_view>, 8> kStepNames{{
    {Step::basic, "basic"},
    {Step::english, "english"},
    {Step::html, "html"},
    {Step::markdown, "markdown"},
    {Step::hashes, "hashes"},
    {Step::code, "code"},
    {Step::user_mentions, "user_mentions"},
    {Step::special_formatting, "special_formatting"},
}};

std::size_t step_rank(Step s) { return static_cast<std::size_t>(s); }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void bump(ReplacementCounts* counts, std::size_t ReplacementCounts::*field, std::size_t n = 1) {
  if (counts) counts->*field += n;
}

// Case-insensitive ASCII search.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from) {
  if (needle.empty()) return from;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (text::iequals_prefix(haystack, i, needle)) return i;
  }
  return std::string_view::npos;
}

// ---------------------------------------------------------------------------
// HTML

bool is_inline_tag(std::string_view name) {
  static const std::unordered_set<std::string_view> kInline{
      "a",    "abbr", "b",   "big",  "cite", "code", "del",  "dfn",    "em",  "font",
      "i",    "ins",  "kbd", "mark", "q",    "s",    "samp", "small",  "span", "strike",
      "strong", "sub", "sup", "tt",  "u",    "var",
  };
  return kInline.contains(name);
}

// Position of the '>' closing a tag that starts at `from`, honouring quoted
// attribute values. npos when the tag never closes.
std::size_t find_tag_end(std::string_view s, std::size_t from) {
  char quote = 0;
  for (std::size_t i = from; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '>') {
      return i;
    } else if (c == '<') {
      return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

void append_entity_char(std::string& out, char32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || text::is_control(cp) || text::is_whitespace(cp) || cp == 0x85) {
    out.push_back(' ');
    return;
  }
  std::string piece;
  text::append_utf8(piece, cp);
  out += text::to_lower(piece);
}

std::string decode_entities(std::string_view s) {
  static const std::vector<std::pair<std::string_view, char32_t>> kNamed{
      {"amp", U'&'},   {"lt", U'<'},      {"gt", U'>'},      {"quot", U'"'},   {"apos", U'\''},
      {"nbsp", U' '},  {"ndash", 0x2013}, {"mdash", 0x2014}, {"hellip", 0x2026}, {"copy", 0xA9},
  };
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    const std::string_view body = s.substr(i + 1, semi - i - 1);
    bool decoded = false;
    if (!body.empty() && body[0] == '#') {
      const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
      const std::string_view digits = body.substr(hex ? 2 : 1);
      if (!digits.empty()) {
        char32_t cp = 0;
        bool ok = true;
        for (char c : digits) {
          int v;
          if (c >= '0' && c <= '9') v = c - '0';
          else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
          else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
          else {
            ok = false;
            break;
          }
          cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(v);
          if (cp > 0x10FFFF) {
            ok = false;
            break;
          }
        }
        if (ok) {
          append_entity_char(out, cp);
          decoded = true;
        }
      }
    } else {
      for (const auto& [name, cp] : kNamed) {
        if (body == name) {
          append_entity_char(out, cp);
          decoded = true;
          break;
        }
      }
    }
    if (decoded) {
      i = semi + 1;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token helpers shared by the Markdown and Jira rules

bool all_of_chars(std::string_view tok, std::string_view allowed) {
  return !tok.empty() && tok.find_first_not_of(allowed) == std::string_view::npos;
}

// Removes runs of marker characters that sit on a token edge (start of token,
// end of token, or next to punctuation). Runs strictly between two word
// characters, as in snake_case, are kept.
std::string strip_edge_markers(std::string_view tok, std::string_view markers, std::size_t* removed) {
  if (text::is_sentinel(tok)) return std::string(tok);
  std::string out;
  std::size_t i = 0;
  while (i < tok.size()) {
    if (markers.find(tok[i]) == std::string_view::npos) {
      out.push_back(tok[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < tok.size() && markers.find(tok[j]) != std::string_view::npos) ++j;
    const bool word_before = i > 0 && (text::is_ascii_alnum(tok[i - 1]) ||
                                       static_cast<unsigned char>(tok[i - 1]) >= 0x80);
    const bool word_after = j < tok.size() && (text::is_ascii_alnum(tok[j]) ||
                                               static_cast<unsigned char>(tok[j]) >= 0x80);
    if (word_before && word_after) {
      out.append(tok.substr(i, j - i));
    } else if (removed) {
      ++*removed;
    }
    i = j;
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = s.find('\n', start);
    lines.emplace_back(s.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

// Replaces delimited regions [open ... close] by `replacement` (or by their
// inner text when keep_inner is set). Unclosed openers are dropped.
std::string replace_delimited(std::string_view s, std::string_view open, std::string_view close,
                              bool keep_inner, std::string_view replacement, std::size_t* hits) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t a = s.find(open, i);
    if (a == std::string_view::npos) {
      out.append(s.substr(i));
      break;
    }
    out.append(s.substr(i, a - i));
    const std::size_t b = s.find(close, a + open.size());
    if (b == std::string_view::npos) {
      out.push_back(' ');
      i = a + open.size();
      continue;
    }
    out.push_back(' ');
    if (keep_inner) {
      out.append(s.substr(a + open.size(), b - a - open.size()));
    } else {
      out.append(replacement);
      if (hits) ++*hits;
    }
    out.push_back(' ');
    i = b + close.size();
  }
  return out;
}

// Inline code spans delimited by equal-length backtick runs.
std::string replace_backtick_spans(std::string_view s, bool mask_code, ReplacementCounts* counts) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '`') {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t run_end = i;
    while (run_end < s.size() && s[run_end] == '`') ++run_end;
    const std::string_view fence = s.substr(i, run_end - i);
    std::size_t close = s.find(fence, run_end);
    // The closing run must have exactly the same length.
    while (close != std::string_view::npos && close + fence.size() < s.size() &&
           s[close + fence.size()] == '`') {
      std::size_t k = close;
      while (k < s.size() && s[k] == '`') ++k;
      close = s.find(fence, k);
    }
    if (close == std::string_view::npos) {
      bump(counts, &ReplacementCounts::markdown_markers);
      out.push_back(' ');
      i = run_end;
      continue;
    }
    out.push_back(' ');
    if (mask_code) {
      out.append(text::kCodeToken);
      bump(counts, &ReplacementCounts::code);
    } else {
      out.append(s.substr(run_end, close - run_end));
    }
    out.push_back(' ');
    i = close + fence.size();
  }
  return out;
}

// [label](url) -> label, ![alt](url) -> removed, [label][ref] -> label.
std::string reduce_links(std::string_view s, ReplacementCounts* counts) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool image = s[i] == '!' && i + 1 < s.size() && s[i + 1] == '[';
    if (s[i] != '[' && !image) {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t lb = image ? i + 1 : i;
    const std::size_t rb = s.find(']', lb + 1);
    if (rb == std::string_view::npos || s.substr(lb + 1, rb - lb - 1).find('[') != std::string_view::npos ||
        rb + 1 >= s.size() || (s[rb + 1] != '(' && s[rb + 1] != '[')) {
      out.push_back(s[i++]);
      continue;
    }
    const char closer = s[rb + 1] == '(' ? ')' : ']';
    const std::size_t end = s.find(closer, rb + 2);
    if (end == std::string_view::npos) {
      out.push_back(s[i++]);
      continue;
    }
    bump(counts, &ReplacementCounts::markdown_markers);
    if (!image) {
      out.push_back(' ');
      out.append(s.substr(lb + 1, rb - lb - 1));
      out.push_back(' ');
    } else {
      out.push_back(' ');
    }
    i = end + 1;
  }
  return out;
}

bool is_numbered_bullet(std::string_view tok) {
  if (tok.size() < 2) return false;
  const char last = tok.back();
  if (last != '.' && last != ')') return false;
  return std::all_of(tok.begin(), tok.end() - 1, [](char c) { return c >= '0' && c <= '9'; });
}

// ---------------------------------------------------------------------------
// Jira and commit trailers

constexpr std::array<std::string_view, 3> kTrailerKeys{"signed-off-by:", "co-authored-by:", "git-svn-id:"};

std::string strip_trailers(std::string_view s, ReplacementCounts* counts) {
  std::vector<std::string> kept;
  for (const std::string& line : split_lines(s)) {
    std::size_t cut = std::string::npos;
    for (std::string_view key : kTrailerKeys) {
      std::size_t pos = 0;
      while ((pos = ifind(line, key, pos)) != std::string::npos) {
        if (pos == 0 || is_space(line[pos - 1])) {
          cut = std::min(cut, pos);
          break;
        }
        ++pos;
      }
    }
    if (cut != std::string::npos) {
      bump(counts, &ReplacementCounts::special_markup);
      // sentinels inside the trailer stay
      std::string rest = line.substr(0, cut);
      for (std::string_view tok : text::split_whitespace(std::string_view(line).substr(cut))) {
        if (tok == "[HASH]" || tok == "[CODE]" || tok == "[USER]") {
          rest += ' ';
          rest += tok;
        }
      }
      kept.push_back(rest);
    } else {
      kept.push_back(line);
    }
  }
  return text::join(kept, "\n");
}

std::string strip_jira(std::string_view s, bool mask_code, ReplacementCounts* counts) {
  std::string t(s);
  std::size_t code_hits = 0;
  for (std::string_view macro : {std::string_view("code"), std::string_view("noformat")}) {
    std::string out;
    std::size_t i = 0;
    const std::string open = "{" + std::string(macro);
    const std::string close = "{" + std::string(macro) + "}";
    while (i < t.size()) {
      std::size_t a = ifind(t, open, i);
      // Only "{code}" or "{code:...}" open a block.
      while (a != std::string::npos && a + open.size() < t.size() && t[a + open.size()] != '}' &&
             t[a + open.size()] != ':') {
        a = ifind(t, open, a + 1);
      }
      if (a == std::string::npos) {
        out.append(t, i, std::string::npos);
        break;
      }
      out.append(t, i, a - i);
      const std::size_t open_end = t.find('}', a);
      if (open_end == std::string::npos) {
        out.append(t, a, std::string::npos);
        break;
      }
      const std::size_t b = ifind(t, close, open_end + 1);
      out.push_back(' ');
      if (b == std::string::npos) {
        bump(counts, &ReplacementCounts::special_markup);
        i = open_end + 1;
        continue;
      }
      if (mask_code) {
        out.append(text::kCodeToken);
        ++code_hits;
      } else {
        out.append(t, open_end + 1, b - open_end - 1);
      }
      out.push_back(' ');
      i = b + close.size();
    }
    t = std::move(out);
  }
  bump(counts, &ReplacementCounts::code, code_hits);

  // Block macros whose markers are dropped but whose content stays.
  static constexpr std::array<std::string_view, 14> kMacros{
      "quote", "panel", "color", "anchor", "toc",  "section", "column",
      "tip",   "info",  "note",  "warning", "expand", "code", "noformat"};
  {
    std::string out;
    std::size_t i = 0;
    while (i < t.size()) {
      if (t[i] == '{') {
        bool matched = false;
        for (std::string_view m : kMacros) {
          if (text::iequals_prefix(t, i + 1, m)) {
            const std::size_t after = i + 1 + m.size();
            if (after < t.size() && (t[after] == '}' || t[after] == ':')) {
              const std::size_t end = t.find('}', after);
              if (end != std::string::npos) {
                out.push_back(' ');
                bump(counts, &ReplacementCounts::special_markup);
                i = end + 1;
                matched = true;
              }
            }
            break;
          }
        }
        if (matched) continue;
      }
      out.push_back(t[i++]);
    }
    t = std::move(out);
  }

  // [~user] mentions and [label|url] links.
  {
    std::string out;
    std::size_t i = 0;
    while (i < t.size()) {
      if (t[i] == '[' && !text::is_sentinel(std::string_view(t).substr(i, 6))) {
        const std::size_t rb = t.find(']', i + 1);
        if (rb != std::string::npos && t.find('[', i + 1) > rb) {
          const std::string_view inner = std::string_view(t).substr(i + 1, rb - i - 1);
          if (!inner.empty() && inner[0] == '~' && inner.size() > 1) {
            out.push_back(' ');
            out.append(text::kUserToken);
            out.push_back(' ');
            bump(counts, &ReplacementCounts::users);
            i = rb + 1;
            continue;
          }
          const std::size_t bar = inner.find('|');
          if (bar != std::string_view::npos) {
            out.push_back(' ');
            out.append(inner.substr(0, bar));
            out.push_back(' ');
            bump(counts, &ReplacementCounts::special_markup);
            i = rb + 1;
            continue;
          }
        }
      }
      out.push_back(t[i++]);
    }
    t = std::move(out);
  }

  // {{monospace}} markers.
  for (std::string_view marker : {std::string_view("{{"), std::string_view("}}")}) {
    std::size_t pos;
    while ((pos = t.find(marker)) != std::string::npos) {
      t.replace(pos, marker.size(), " ");
      bump(counts, &ReplacementCounts::special_markup);
    }
  }

  // Token-level rules: headings, blockquote, bullets, rules, table pipes, emphasis.
  std::vector<std::string> lines_out;
  for (const std::string& line : split_lines(t)) {
    std::vector<std::string> toks;
    for (std::string_view tok : text::split_whitespace(line)) {
      const bool heading = tok.size() == 3 && text::ascii_lower(tok[0]) == 'h' && tok[1] >= '1' &&
                           tok[1] <= '6' && tok[2] == '.';
      if (heading || (text::iequals_prefix(tok, 0, "bq.") && tok.size() == 3) ||
          all_of_chars(tok, "|") || all_of_chars(tok, "*#") || (tok.size() >= 4 && all_of_chars(tok, "-"))) {
        bump(counts, &ReplacementCounts::special_markup);
        continue;
      }
      std::size_t removed = 0;
      std::string cleaned = strip_edge_markers(tok, "*_", &removed);
      bump(counts, &ReplacementCounts::special_markup, removed);
      if (!cleaned.empty()) toks.push_back(std::move(cleaned));
    }
    lines_out.push_back(text::join(toks, " "));
  }
  return text::join(lines_out, "\n");
}

const std::unordered_set<std::string_view>& abbreviations() {
  static const std::unordered_set<std::string_view> kAbbrev{
      "e.g", "i.e", "vs", "cf", "mr", "mrs", "ms", "dr", "prof", "approx", "incl", "fig", "eg", "ie", "al", "st",
  };
  return kAbbrev;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(Source source) {
  for (auto [s, name] : kSourceNames) {
    if (s == source) return name;
  }
  return "unknown";
}

Source parse_source(std::string_view name) {
  for (auto [s, n] : kSourceNames) {
    if (n == name) return s;
  }
  throw ConfigError("unknown document source '" + std::string(name) + "'");
}

std::string_view to_string(Step step) {
  for (auto [s, name] : kStepNames) {
    if (s == step) return name;
  }
  return "unknown";
}

Step parse_step(std::string_view name) {
  for (auto [s, n] : kStepNames) {
    if (n == name) return s;
  }
  throw ConfigError("unknown preprocessing step '" + std::string(name) + "'");
}

std::string_view to_string(DropReason reason) {
  return reason == DropReason::non_english ? "non_english" : "empty_after_cleaning";
}

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.per_source[Source::github_issue] = {Step::basic, Step::english, Step::markdown, Step::hashes,
                                          Step::code, Step::user_mentions};
  cfg.per_source[Source::commit_message] = {Step::basic, Step::english, Step::hashes,
                                            Step::special_formatting};
  cfg.per_source[Source::stackoverflow] = {Step::basic, Step::html, Step::hashes, Step::code,
                                           Step::user_mentions};
  cfg.per_source[Source::jira_issue] = {Step::basic, Step::hashes, Step::code, Step::special_formatting};
  return cfg;
}

PipelineConfig PipelineConfig::from_json_text(std::string_view json_text) {
  PipelineConfig cfg = defaults();
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  try {
    if (j.contains("steps")) {
      cfg.steps.clear();
      for (const auto& s : j.at("steps")) cfg.steps.push_back(parse_step(s.get<std::string>()));
    }
    if (j.contains("per_source")) {
      cfg.per_source.clear();
      for (const auto& [name, steps] : j.at("per_source").items()) {
        StepSet set;
        for (const auto& s : steps) set.insert(parse_step(s.get<std::string>()));
        cfg.per_source[parse_source(name)] = set;
      }
    }
    if (j.contains("english_threshold")) cfg.english_threshold = j.at("english_threshold").get<double>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  std::size_t last_rank = 0;
  bool first = true;
  StepSet listed;
  for (Step s : steps) {
    if (listed.contains(s)) throw ConfigError("step '" + std::string(to_string(s)) + "' listed twice");
    if (!first && step_rank(s) < last_rank) {
      throw ConfigError("step '" + std::string(to_string(s)) + "' is out of the canonical order");
    }
    listed.insert(s);
    last_rank = step_rank(s);
    first = false;
  }
  for (const auto& [source, set] : per_source) {
    for (Step s : kStepOrder) {
      if (!set.contains(s)) continue;
      if (!listed.contains(s)) {
        throw ConfigError("source '" + std::string(to_string(source)) + "' enables step '" +
                          std::string(to_string(s)) + "' which is not in the step list");
      }
      if (s == Step::special_formatting && source != Source::commit_message && source != Source::jira_issue) {
        throw ConfigError("special_formatting has no rules for source '" + std::string(to_string(source)) + "'");
      }
    }
  }
  if (!(english_threshold >= 0.0 && english_threshold <= 1.0)) {
    throw ConfigError("english_threshold must lie in [0, 1]");
  }
  if (threads == 0) throw ConfigError("threads must be at least 1");
}

bool PipelineConfig::enabled(Source source, Step step) const {
  const auto it = per_source.find(source);
  return it != per_source.end() && it->second.contains(step);
}

std::string CleanDocument::joined_text() const { return text::join(sentences, " "); }

ReplacementCounts& ReplacementCounts::operator+=(const ReplacementCounts& o) {
  hashes += o.hashes;
  code += o.code;
  users += o.users;
  html_tags += o.html_tags;
  markdown_markers += o.markdown_markers;
  special_markup += o.special_markup;
  return *this;
}

// ---------------------------------------------------------------------------
// Language detection

const std::vector<std::string_view>& english_stopwords() {
  static const std::vector<std::string_view> kWords{
      "the",   "of",    "and",   "to",    "a",     "in",     "is",    "it",    "you",   "that",
      "he",    "was",   "for",   "on",    "are",   "with",   "as",    "i",     "his",   "they",
      "be",    "at",    "one",   "have",  "this",  "from",   "or",    "had",   "by",    "not",
      "but",   "what",  "some",  "we",    "can",   "out",    "other", "were",  "all",   "there",
      "when",  "up",    "use",   "your",  "how",   "said",   "an",    "each",  "she",   "which",
      "do",    "their", "if",    "will",  "way",   "about",  "many",  "then",  "them",  "would",
      "so",    "these", "her",   "him",   "has",   "more",   "could", "my",    "than",  "been",
      "who",   "its",   "now",   "did",   "get",   "may",    "should", "into", "only",  "just",
      "also",  "any",   "after", "because", "does", "where", "why",   "here",  "our",   "very",
      "me",    "no",    "same",  "too",   "both",  "those",  "while", "am",    "being", "there's",
  };
  return kWords;
}

double StopwordDetector::stopword_ratio(std::string_view input) const {
  static const std::unordered_set<std::string_view> kSet(english_stopwords().begin(), english_stopwords().end());
  const std::string lowered = text::to_lower(input);
  std::size_t words = 0;
  std::size_t hits = 0;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    ++words;
    if (kSet.contains(current)) ++hits;
    current.clear();
  };
  for (char32_t cp : text::decode(lowered)) {
    if (text::is_alnum(cp) && !(cp >= U'0' && cp <= U'9')) {
      text::append_utf8(current, cp);
    } else if (cp == U'\'' && !current.empty()) {
      current.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return words == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(words);
}

bool StopwordDetector::is_english(std::string_view input) const {
  if (text::trim(input).empty()) return false;
  return stopword_ratio(input) >= threshold_;
}

bool detect_english(std::string_view input, const LanguageDetector& detector) {
  if (text::trim(input).empty()) return false;
  return detector.is_english(input);
}

// ---------------------------------------------------------------------------
// Steps

std::string normalize_basic(std::string_view input) {
  // Sentinels from an earlier run keep their case.
  std::string lowered;
  std::size_t from = 0;
  for (std::size_t pos = input.find('['); pos != std::string_view::npos; pos = input.find('[', pos + 1)) {
    if (!text::is_sentinel(input.substr(pos, 6))) continue;
    lowered += text::to_lower(input.substr(from, pos - from));
    lowered += input.substr(pos, 6);
    from = pos + 6;
    pos += 5;
  }
  lowered += text::to_lower(input.substr(from));
  std::string out;
  out.reserve(lowered.size());
  for (char32_t cp : text::decode(lowered)) {
    switch (cp) {
      case U'\n':
      case U'\r':
      case U'\t':
      case 0x0B:
      case 0x0C:
      case 0x85:
      case 0x2028:
      case 0x2029:
        out.push_back(' ');
        continue;
      case 0x2018:
      case 0x2019:
      case 0x201A:
      case 0x201B:
      case 0x2032:
        out.push_back('\'');
        continue;
      case 0x201C:
      case 0x201D:
      case 0x201E:
      case 0x201F:
      case 0x2033:
        out.push_back('"');
        continue;
      default:
        break;
    }
    if (text::is_control(cp) || cp == 0xFFFD) continue;
    text::append_utf8(out, cp);
  }
  return text::collapse_whitespace(out);
}

std::string strip_html(std::string_view in, bool mask_code, ReplacementCounts* counts) {
  std::string out;
  out.reserve(in.size());
  const std::size_t n = in.size();
  std::size_t i = 0;
  while (i < n) {
    if (in[i] != '<') {
      out.push_back(in[i++]);
      continue;
    }
    if (in.substr(i, 4) == "<!--") {
      const std::size_t end = in.find("-->", i + 4);
      i = end == std::string_view::npos ? n : end + 3;
      out.push_back(' ');
      bump(counts, &ReplacementCounts::html_tags);
      continue;
    }
    std::size_t j = i + 1;
    const bool closing = j < n && in[j] == '/';
    if (closing) ++j;
    const bool tag_start = j < n && (std::isalpha(static_cast<unsigned char>(in[j])) ||
                                     (!closing && (in[j] == '!' || in[j] == '?')));
    const std::size_t gt = tag_start ? find_tag_end(in, j) : std::string_view::npos;
    if (gt == std::string_view::npos) {
      out.push_back(in[i++]);
      continue;
    }
    std::string name;
    for (std::size_t k = j; k < gt && text::is_ascii_alnum(in[k]); ++k) name.push_back(text::ascii_lower(in[k]));
    bump(counts, &ReplacementCounts::html_tags);

    if (!closing && mask_code && name == "code") {
      const std::size_t close = ifind(in, "</code", gt + 1);
      if (close != std::string_view::npos) {
        const std::size_t cgt = in.find('>', close);
        i = cgt == std::string_view::npos ? n : cgt + 1;
        out.append(" [CODE] ");
        bump(counts, &ReplacementCounts::code);
        continue;
      }
      out.push_back(' ');
      i = gt + 1;
      continue;
    }
    if (!closing && (name == "script" || name == "style")) {
      const std::size_t close = ifind(in, "</" + name, gt + 1);
      if (close != std::string_view::npos) {
        const std::size_t cgt = in.find('>', close);
        i = cgt == std::string_view::npos ? n : cgt + 1;
        out.push_back(' ');
        continue;
      }
    }
    if (!is_inline_tag(name)) out.push_back(' ');
    i = gt + 1;
  }
  return text::collapse_whitespace(decode_entities(out));
}

std::string strip_markdown(std::string_view in, bool mask_code, ReplacementCounts* counts) {
  std::size_t code_hits = 0;
  std::string t = replace_delimited(in, "```", "```", !mask_code, text::kCodeToken, &code_hits);
  t = replace_delimited(t, "~~~", "~~~", !mask_code, text::kCodeToken, &code_hits);
  bump(counts, &ReplacementCounts::code, code_hits);
  t = replace_backtick_spans(t, mask_code, counts);
  t = reduce_links(t, counts);

  std::vector<std::string> lines_out;
  for (const std::string& line : split_lines(t)) {
    std::vector<std::string> toks;
    bool line_start = true;
    for (std::string_view tok : text::split_whitespace(line)) {
      const bool marker = (all_of_chars(tok, "#") && tok.size() <= 6) ||  // heading
                          all_of_chars(tok, ">") ||                    // blockquote
                          tok == "-" || tok == "*" || tok == "+" ||    // bullets
                          (line_start && is_numbered_bullet(tok)) ||
                          (tok.size() >= 3 && all_of_chars(tok, "-*_=")) ||  // rules
                          tok == "[x]" || (all_of_chars(tok, "|:-") && tok.find('|') != std::string_view::npos);
      line_start = false;
      if (marker) {
        bump(counts, &ReplacementCounts::markdown_markers);
        continue;
      }
      std::size_t removed = 0;
      std::string cleaned = strip_edge_markers(tok, "*_~", &removed);
      bump(counts, &ReplacementCounts::markdown_markers, removed);
      if (!cleaned.empty()) toks.push_back(std::move(cleaned));
    }
    lines_out.push_back(text::join(toks, " "));
  }
  return text::collapse_whitespace(text::join(lines_out, "\n"));
}

std::string mask_hashes(std::string_view in, ReplacementCounts* counts) {
  std::vector<std::string> out;
  for (std::string_view tok : text::split_whitespace(in)) {
    std::size_t a = 0;
    std::size_t b = tok.size();
    while (a < b && !text::is_ascii_alnum(tok[a])) ++a;
    while (b > a && !text::is_ascii_alnum(tok[b - 1])) --b;
    const std::string_view core = tok.substr(a, b - a);
    const bool hex = core.size() >= 7 && std::all_of(core.begin(), core.end(), [](char c) {
                       return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
                     });
    if (hex) {
      std::string replaced(tok.substr(0, a));
      replaced += text::kHashToken;
      replaced += tok.substr(b);
      out.push_back(std::move(replaced));
      bump(counts, &ReplacementCounts::hashes);
    } else {
      out.emplace_back(tok);
    }
  }
  return text::join(out, " ");
}

std::string mask_user_mentions(std::string_view in, ReplacementCounts* counts) {
  std::vector<std::string> out;
  for (std::string_view tok : text::split_whitespace(in)) {
    std::size_t at = 0;
    while (at < tok.size() && std::string_view("([{\"'<").find(tok[at]) != std::string_view::npos) ++at;
    if (at >= tok.size() || tok[at] != '@') {
      out.emplace_back(tok);
      continue;
    }
    // Measure the run of word characters after '@'.
    const std::u32string rest = text::decode(tok.substr(at + 1));
    std::size_t len = 0;
    while (len < rest.size() && (text::is_alnum(rest[len]) || rest[len] == U'-' || rest[len] == U'_')) ++len;
    if (len == 0) {
      out.emplace_back(tok);
      continue;
    }
    std::string replaced(tok.substr(0, at));
    replaced += text::kUserToken;
    replaced += text::encode(std::u32string_view(rest).substr(len));
    out.push_back(std::move(replaced));
    bump(counts, &ReplacementCounts::users);
  }
  return text::join(out, " ");
}

std::string strip_special_formatting(std::string_view in, Source source, bool mask_code,
                                     ReplacementCounts* counts) {
  switch (source) {
    case Source::commit_message:
      return text::collapse_whitespace(strip_trailers(in, counts));
    case Source::jira_issue:
      return text::collapse_whitespace(strip_jira(in, mask_code, counts));
    default:
      throw std::invalid_argument("special formatting rules exist only for commit messages and Jira issues");
  }
}

std::vector<std::string> split_sentences(std::string_view in) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    const std::string_view s = text::trim(in.substr(start, end - start));
    if (!s.empty()) sentences.emplace_back(text::collapse_whitespace(s));
  };
  while (i < in.size()) {
    const char c = in[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < in.size() && (in[j] == '.' || in[j] == '!' || in[j] == '?')) ++j;
    while (j < in.size() && (in[j] == '"' || in[j] == '\'' || in[j] == ')')) ++j;
    if (j < in.size() && !is_space(in[j])) {
      i = j;
      continue;
    }
    // Word that ends at the terminator, e.g. "e.g" in "e.g. foo".
    std::size_t w = i;
    while (w > start && !is_space(in[w - 1])) --w;
    std::string word;
    for (std::size_t k = w; k < i; ++k) word.push_back(text::ascii_lower(in[k]));
    while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
      word.erase(word.begin());
    }
    if (in[i] == '.' && j - i == 1 && abbreviations().contains(word)) {
      i = j;
      continue;
    }
    emit(j);
    start = j;
    i = j;
  }
  emit(in.size());
  return sentences;
}

// ---------------------------------------------------------------------------
// Pipeline

CleanDocument run_pipeline(const Document& doc, const PipelineConfig& config, const LanguageDetector& detector,
                           ReplacementCounts* counts) {
  if (!config.per_source.contains(doc.source)) {
    throw ConfigError("no preprocessing steps configured for source '" + std::string(to_string(doc.source)) + "'");
  }
  CleanDocument clean;
  clean.id = doc.id;
  clean.source = doc.source;
  const bool mask_code = config.enabled(doc.source, Step::code);
  std::string t = doc.text;
  for (Step step : config.steps) {
    if (!config.enabled(doc.source, step)) continue;
    switch (step) {
      case Step::basic:
        t = normalize_basic(t);
        break;
      case Step::english:
        if (!detect_english(t, detector)) {
          clean.dropped = true;
          clean.drop_reason = DropReason::non_english;
          return clean;
        }
        break;
      case Step::html:
        t = strip_html(t, mask_code, counts);
        break;
      case Step::markdown:
        t = strip_markdown(t, mask_code, counts);
        break;
      case Step::hashes:
        t = mask_hashes(t, counts);
        break;
      case Step::code:
        // Realized inside the HTML, Markdown and Jira rules.
        break;
      case Step::user_mentions:
        t = mask_user_mentions(t, counts);
        break;
      case Step::special_formatting:
        t = strip_special_formatting(t, doc.source, mask_code, counts);
        break;
    }
  }
  clean.sentences = split_sentences(text::collapse_whitespace(t));
  if (clean.sentences.empty()) {
    clean.dropped = true;
    clean.drop_reason = DropReason::empty_after_cleaning;
  }
  return clean;
}

CleanDocument run_pipeline(const Document& doc, const PipelineConfig& config) {
  const StopwordDetector detector(config.english_threshold);
  return run_pipeline(doc, config, detector);
}

std::vector<CleanDocument> run_corpus(std::span<const Document> docs, const PipelineConfig& config,
                                      const LanguageDetector& detector, PipelineReport* report) {
  config.validate();
  std::vector<CleanDocument> results(docs.size());
  std::vector<ReplacementCounts> counts(docs.size());
  const std::size_t workers = std::min<std::size_t>(config.threads, std::max<std::size_t>(docs.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i) results[i] = run_pipeline(docs[i], config, detector, &counts[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < docs.size(); i = next++) {
            try {
              results[i] = run_pipeline(docs[i], config, detector, &counts[i]);
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  if (report) {
    *report = PipelineReport{};
    report->documents = docs.size();
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const CleanDocument& c = results[i];
      report->replacements += counts[i];
      for (Step s : config.steps) {
        if (!config.enabled(docs[i].source, s)) continue;
        // Steps after the language check never ran on dropped non-English documents.
        if (c.drop_reason == DropReason::non_english && step_rank(s) > step_rank(Step::english)) continue;
        ++report->step_applications[s];
      }
      if (!c.dropped) {
        ++report->kept;
        report->sentences += c.sentences.size();
      } else if (c.drop_reason == DropReason::non_english) {
        ++report->dropped_non_english;
      } else {
        ++report->dropped_empty;
      }
    }
  }
  return results;
}

std::string PipelineReport::to_json() const {
  json j;
  j["documents"] = documents;
  j["kept"] = kept;
  j["sentences"] = sentences;
  j["dropped"] = {{"non_english", dropped_non_english}, {"empty_after_cleaning", dropped_empty}};
  json steps = json::object();
  for (Step s : kStepOrder) {
    const auto it = step_applications.find(s);
    steps[std::string(to_string(s))] = it == step_applications.end() ? 0 : it->second;
  }
  j["step_applications"] = steps;
  j["replacements"] = {
      {"hash", replacements.hashes},
      {"code", replacements.code},
      {"user", replacements.users},
      {"html_tags", replacements.html_tags},
      {"markdown_markers", replacements.markdown_markers},
      {"special_markup", replacements.special_markup},
  };
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// I/O

std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "documents line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError(where + "invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("source") || !j.contains("text")) {
      throw InputError(where + "expected an object with id, source and text");
    }
    Document doc;
    try {
      doc.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      doc.text = j.at("text").get<std::string>();
      const std::string source = j.at("source").get<std::string>();
      try {
        doc.source = parse_source(source);
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
      if (j.contains("meta") && j.at("meta").is_object()) {
        for (const auto& [k, v] : j.at("meta").items()) doc.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    }
    if (doc.id.empty()) throw InputError(where + "empty document id");
    if (!seen.insert(doc.id).second) throw InputError(where + "duplicate document id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string document_to_json(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["source"] = to_string(doc.source);
  j["text"] = doc.text;
  j["meta"] = doc.meta;
  return j.dump();
}

void write_corpus(std::ostream& out, std::span<const CleanDocument> docs) {
  bool first = true;
  for (const CleanDocument& doc : docs) {
    if (doc.dropped) continue;
    if (!first) out << '\n';
    first = false;
    for (const std::string& s : doc.sentences) out << s << '\n';
  }
}

std::vector<std::vector<std::string>> read_corpus(std::istream& in) {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::string> current;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) {
      if (!current.empty()) docs.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(line);
  }
  if (!current.empty()) docs.push_back(std::move(current));
  return docs;
}

}  // namespace sebench::corpus
