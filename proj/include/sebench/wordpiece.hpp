#pragma once

// WordPiece vocabularies: loading/saving vocab.txt files, training a new
// vocabulary from a cleaned corpus, and greedy longest-match tokenization.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sebench/error.hpp"

namespace sebench::wordpiece {

inline constexpr std::string_view kContinuation = "##";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";

// Order in which a trained vocabulary lists its special tokens.
inline constexpr std::array<std::string_view, 8> kSpecialTokens{
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[HASH]", "[CODE]", "[USER]",
};

bool is_special(std::string_view token);
bool is_continuation(std::string_view token);

// Pre-tokenization shared by training and tokenization: drops control
// characters, lowercases and strips accents unless cased, then splits on
// whitespace, punctuation and CJK characters. Special tokens written verbatim
// (e.g. "[MASK]") stay whole.
std::vector<std::string> basic_split(std::string_view text, bool cased);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws InputError on empty or duplicated tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  // vocab.txt format: one token per line, line number == id.
  static Vocabulary read(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  bool contains(std::string_view token) const;
  std::optional<std::size_t> id(std::string_view token) const;
  bool has_all_specials() const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

struct TokenizerOptions {
  bool cased = false;
  std::size_t max_word_chars = 100;
};

class Tokenizer {
 public:
  // Throws ConfigError if the vocabulary lacks [UNK].
  explicit Tokenizer(Vocabulary vocab, TokenizerOptions options = {});

  // Pre-tokenization: cleanup, optional lowercasing and accent stripping,
  // whitespace/punctuation/CJK splitting. Special tokens stay atomic.
  std::vector<std::string> split_words(std::string_view text) const;
  // Greedy longest-match of a single pre-tokenized word.
  std::vector<std::string> tokenize_word(std::string_view word) const;
  // Pieces grouped by the word they came from.
  std::vector<std::vector<std::string>> tokenize_words(std::string_view text) const;
  std::vector<std::string> tokenize(std::string_view text) const;

  const Vocabulary& vocab() const { return vocab_; }
  const TokenizerOptions& options() const { return options_; }

 private:
  Vocabulary vocab_;
  TokenizerOptions options_;
};

// Joins with spaces and fuses ##-pieces onto the previous token.
// Throws InputError when the first token is a continuation piece.
std::string detokenize(const std::vector<std::string>& tokens);

struct TrainOptions {
  std::size_t target_size = 30522;
  std::size_t min_frequency = 2;
  std::size_t max_word_chars = 100;
};

// Trains an uncased vocabulary of exactly target_size tokens. Specials come
// first, then sorted word-initial characters, then sorted ##characters, then
// merges in the order they were learned. Each round merges the adjacent pair
// with the highest freq(ab) / (freq(a) * freq(b)); ties go to the
// lexicographically smaller merged string.
// Throws InputError on an empty corpus and when target_size cannot be reached
// (the message carries the achievable size).
Vocabulary train_vocab(const std::vector<std::string>& sentences, const TrainOptions& options);

// Thrown by train_vocab when merges run out before target_size.
class UnreachableSizeError : public InputError {
 public:
  UnreachableSizeError(std::size_t requested, std::size_t achievable);
  std::size_t requested() const { return requested_; }
  std::size_t achievable() const { return achievable_; }

 private:
  std::size_t requested_;
  std::size_t achievable_;
};

}  // namespace sebench::wordpiece
