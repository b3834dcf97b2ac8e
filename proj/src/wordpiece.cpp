#include "sebench/wordpiece.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <unordered_set>

#include "sebench/text.hpp"

namespace sebench::wordpiece {

std::vector<std::string> basic_split(std::string_view input, bool cased) {
  std::vector<std::string> words;
  auto process_plain = [&](std::string_view segment) {
    if (segment.empty()) return;
    std::string cleaned;
    cleaned.reserve(segment.size());
    for (char32_t cp : text::decode(segment)) {
      if (cp == 0 || cp == 0xFFFD || text::is_control(cp)) continue;
      if (text::is_whitespace(cp)) {
        cleaned.push_back(' ');
      } else if (text::is_cjk(cp)) {
        cleaned.push_back(' ');
        text::append_utf8(cleaned, cp);
        cleaned.push_back(' ');
      } else {
        text::append_utf8(cleaned, cp);
      }
    }
    if (!cased) cleaned = text::strip_accents(text::to_lower(cleaned));
    for (std::string_view chunk : text::split_whitespace(cleaned)) {
      std::string current;
      for (char32_t cp : text::decode(chunk)) {
        if (text::is_punctuation(cp)) {
          if (!current.empty()) words.push_back(std::move(current));
          current.clear();
          std::string p;
          text::append_utf8(p, cp);
          words.push_back(std::move(p));
        } else if (text::is_whitespace(cp)) {
          // strip_accents can expose whitespace-like marks; treat as a break
          if (!current.empty()) words.push_back(std::move(current));
          current.clear();
        } else {
          text::append_utf8(current, cp);
        }
      }
      if (!current.empty()) words.push_back(std::move(current));
    }
  };

  std::size_t pos = 0;
  std::size_t plain_start = 0;
  while (pos < input.size()) {
    if (input[pos] == '[') {
      bool matched = false;
      for (std::string_view special : kSpecialTokens) {
        if (input.substr(pos, special.size()) == special) {
          process_plain(input.substr(plain_start, pos - plain_start));
          words.emplace_back(special);
          pos += special.size();
          plain_start = pos;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    ++pos;
  }
  process_plain(input.substr(plain_start));
  return words;
}

bool is_special(std::string_view token) {
  return std::find(kSpecialTokens.begin(), kSpecialTokens.end(), token) != kSpecialTokens.end();
}

bool is_continuation(std::string_view token) { return token.starts_with(kContinuation); }

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw InputError("vocabulary entry " + std::to_string(i) + " is empty");
    if (!index_.emplace(tokens_[i], i).second) {
      throw InputError("duplicate vocabulary token '" + tokens_[i] + "' at line " + std::to_string(i + 1));
    }
  }
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // A trailing empty line is a terminator, not a token.
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocabulary file " + path.string());
  return read(in);
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary file " + path.string());
  write(out);
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::optional<std::size_t> Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::has_all_specials() const {
  return std::all_of(kSpecialTokens.begin(), kSpecialTokens.end(), [&](std::string_view s) { return contains(s); });
}

// ---------------------------------------------------------------------------
// Tokenizer

Tokenizer::Tokenizer(Vocabulary vocab, TokenizerOptions options)
    : vocab_(std::move(vocab)), options_(options) {
  if (!vocab_.contains(kUnk)) throw ConfigError("vocabulary has no [UNK] token");
}

std::vector<std::string> Tokenizer::split_words(std::string_view input) const {
  return basic_split(input, options_.cased);
}

std::vector<std::string> Tokenizer::tokenize_word(std::string_view word) const {
  if (is_special(word)) return {vocab_.contains(word) ? std::string(word) : std::string(kUnk)};
  const std::u32string chars = text::decode(word);
  if (chars.size() > options_.max_word_chars) return {std::string(kUnk)};
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::size_t end = chars.size();
    std::string found;
    while (start < end) {
      std::string candidate = start > 0 ? std::string(kContinuation) : std::string();
      candidate += text::encode(std::u32string_view(chars).substr(start, end - start));
      if (vocab_.contains(candidate)) {
        found = std::move(candidate);
        break;
      }
      --end;
    }
    if (found.empty()) return {std::string(kUnk)};
    pieces.push_back(std::move(found));
    start = end;
  }
  return pieces;
}

std::vector<std::vector<std::string>> Tokenizer::tokenize_words(std::string_view input) const {
  std::vector<std::vector<std::string>> out;
  for (const std::string& w : split_words(input)) out.push_back(tokenize_word(w));
  return out;
}

std::vector<std::string> Tokenizer::tokenize(std::string_view input) const {
  std::vector<std::string> out;
  for (const std::string& w : split_words(input)) {
    for (std::string& p : tokenize_word(w)) out.push_back(std::move(p));
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_continuation(tokens[i])) {
      if (i == 0) throw InputError("token sequence starts with continuation piece '" + tokens[i] + "'");
      out.append(tokens[i], kContinuation.size());
    } else {
      if (i) out.push_back(' ');
      out += tokens[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

UnreachableSizeError::UnreachableSizeError(std::size_t requested, std::size_t achievable)
    : InputError("corpus too small for a vocabulary of " + std::to_string(requested) +
                 " tokens; achievable size is " + std::to_string(achievable)),
      requested_(requested),
      achievable_(achievable) {}

namespace {

using Sym = std::uint32_t;
using PairKey = std::uint64_t;

PairKey make_key(Sym a, Sym b) { return (static_cast<PairKey>(a) << 32) | b; }
Sym key_first(PairKey k) { return static_cast<Sym>(k >> 32); }
Sym key_second(PairKey k) { return static_cast<Sym>(k & 0xFFFFFFFFu); }

struct Candidate {
  std::uint64_t pair_freq;
  unsigned __int128 denom;  // freq(a) * freq(b)
  std::string merged;
  std::string first;
  std::string second;
  PairKey key;
  std::uint64_t version;
};

// True when x should be merged before y.
bool better(const Candidate& x, const Candidate& y) {
  const unsigned __int128 lhs = static_cast<unsigned __int128>(x.pair_freq) * y.denom;
  const unsigned __int128 rhs = static_cast<unsigned __int128>(y.pair_freq) * x.denom;
  if (lhs != rhs) return lhs > rhs;
  if (x.merged != y.merged) return x.merged < y.merged;
  if (x.first != y.first) return x.first < y.first;
  return x.second < y.second;
}

struct CandidateOrder {
  bool operator()(const Candidate& x, const Candidate& y) const { return better(y, x); }
};

class MergeTrainer {
 public:
  MergeTrainer(const std::map<std::string, std::uint64_t>& word_counts, std::size_t min_frequency)
      : min_frequency_(std::max<std::size_t>(min_frequency, 1)) {
    for (const auto& [word, count] : word_counts) {
      const std::u32string chars = text::decode(word);
      std::vector<Sym> syms;
      for (std::size_t i = 0; i < chars.size(); ++i) {
        std::string piece = i == 0 ? std::string() : std::string(kContinuation);
        text::append_utf8(piece, chars[i]);
        syms.push_back(intern(piece));
      }
      words_.push_back(std::move(syms));
      counts_.push_back(count);
    }
    for (std::size_t w = 0; w < words_.size(); ++w) add_word(w);
    for (const auto& [key, freq] : pair_freq_) push(key);
  }

  std::vector<std::string> alphabet() const { return names_; }

  // Performs the next merge and returns the new token, or nullopt when no
  // eligible pair is left. `is_new` is false when the merged string already
  // existed as a symbol.
  std::optional<std::string> step(bool& is_new) {
    while (!heap_.empty()) {
      Candidate top = heap_.top();
      heap_.pop();
      const auto v = version_.find(top.key);
      if (v == version_.end() || v->second != top.version) continue;
      apply(top.key, top.merged, is_new);
      return top.merged;
    }
    return std::nullopt;
  }

 private:
  Sym intern(const std::string& name) {
    const auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const Sym id = static_cast<Sym>(names_.size());
    names_.push_back(name);
    ids_.emplace(name, id);
    sym_freq_.push_back(0);
    sym_pairs_.emplace_back();
    return id;
  }

  void add_word(std::size_t w) {
    const auto& syms = words_[w];
    const std::uint64_t c = counts_[w];
    for (Sym s : syms) sym_freq_[s] += c;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const PairKey k = make_key(syms[i], syms[i + 1]);
      auto& f = pair_freq_[k];
      if (f == 0) {
        sym_pairs_[syms[i]].insert(k);
        sym_pairs_[syms[i + 1]].insert(k);
      }
      f += c;
      pair_words_[k].insert(w);
      touched_.insert(k);
    }
  }

  void remove_word(std::size_t w) {
    const auto& syms = words_[w];
    const std::uint64_t c = counts_[w];
    for (Sym s : syms) sym_freq_[s] -= c;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const PairKey k = make_key(syms[i], syms[i + 1]);
      auto it = pair_freq_.find(k);
      it->second -= c;
      if (it->second == 0) {
        pair_freq_.erase(it);
        pair_words_.erase(k);
        sym_pairs_[syms[i]].erase(k);
        sym_pairs_[syms[i + 1]].erase(k);
      } else {
        pair_words_[k].erase(w);
      }
      touched_.insert(k);
    }
  }

  void push(PairKey key) {
    const auto it = pair_freq_.find(key);
    auto& version = version_[key];
    ++version;
    if (it == pair_freq_.end() || it->second < min_frequency_) return;
    const Sym a = key_first(key);
    const Sym b = key_second(key);
    Candidate c;
    c.pair_freq = it->second;
    c.denom = static_cast<unsigned __int128>(sym_freq_[a]) * sym_freq_[b];
    c.first = names_[a];
    c.second = names_[b];
    c.merged = names_[a] + names_[b].substr(kContinuation.size());
    c.key = key;
    c.version = version;
    heap_.push(std::move(c));
  }

  void apply(PairKey key, const std::string& merged, bool& is_new) {
    const Sym a = key_first(key);
    const Sym b = key_second(key);
    is_new = !ids_.contains(merged);
    const Sym c = intern(merged);
    touched_.clear();
    const std::vector<std::size_t> affected(pair_words_[key].begin(), pair_words_[key].end());
    for (std::size_t w : affected) {
      remove_word(w);
      auto& syms = words_[w];
      std::vector<Sym> rewritten;
      rewritten.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          rewritten.push_back(c);
          ++i;
        } else {
          rewritten.push_back(syms[i]);
        }
      }
      syms = std::move(rewritten);
      add_word(w);
    }
    // Scores move for pairs whose count changed and for every pair that
    // involves a symbol whose frequency changed.
    std::unordered_set<PairKey> refresh(touched_.begin(), touched_.end());
    for (Sym s : {a, b, c}) refresh.insert(sym_pairs_[s].begin(), sym_pairs_[s].end());
    std::vector<PairKey> ordered(refresh.begin(), refresh.end());
    std::sort(ordered.begin(), ordered.end());
    for (PairKey k : ordered) push(k);
  }

  std::uint64_t min_frequency_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, Sym> ids_;
  std::vector<std::uint64_t> sym_freq_;
  std::vector<std::unordered_set<PairKey>> sym_pairs_;
  std::vector<std::vector<Sym>> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<PairKey, std::uint64_t> pair_freq_;
  std::unordered_map<PairKey, std::set<std::size_t>> pair_words_;
  std::unordered_map<PairKey, std::uint64_t> version_;
  std::unordered_set<PairKey> touched_;
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> heap_;
};

}  // namespace

Vocabulary train_vocab(const std::vector<std::string>& sentences, const TrainOptions& options) {
  std::map<std::string, std::uint64_t> word_counts;
  for (const std::string& sentence : sentences) {
    for (std::string& w : basic_split(sentence, false)) {
      if (is_special(w)) continue;
      if (text::decode(w).size() > options.max_word_chars) continue;
      ++word_counts[std::move(w)];
    }
  }
  if (word_counts.empty()) throw InputError("cannot train a vocabulary on an empty corpus");

  MergeTrainer trainer(word_counts, options.min_frequency);
  std::vector<std::string> bare;
  std::vector<std::string> cont;
  for (const std::string& s : trainer.alphabet()) (is_continuation(s) ? cont : bare).push_back(s);
  std::sort(bare.begin(), bare.end());
  std::sort(cont.begin(), cont.end());

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  for (auto* group : {&bare, &cont}) {
    for (std::string& s : *group) {
      if (present.insert(s).second) tokens.push_back(std::move(s));
    }
  }
  const std::size_t base = tokens.size();
  if (options.target_size <= base) {
    throw InputError("target size " + std::to_string(options.target_size) +
                     " must exceed the special tokens plus distinct characters (" + std::to_string(base) + ")");
  }
  while (tokens.size() < options.target_size) {
    bool is_new = false;
    std::optional<std::string> merged = trainer.step(is_new);
    if (!merged) throw UnreachableSizeError(options.target_size, tokens.size());
    if (is_new && present.insert(*merged).second) tokens.push_back(std::move(*merged));
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace sebench::wordpiece
