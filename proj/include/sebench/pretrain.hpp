#pragma once

// Pre-training instance generation (sentence pairs with next-sentence labels
// and whole-word masking) and sequence-length statistics.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sebench/wordpiece.hpp"

namespace sebench::pretrain {

// A corpus as produced by corpus::read_corpus: documents of sentences.
using Corpus = std::vector<std::vector<std::string>>;

struct TrainingInstance {
  std::vector<std::string> tokens;  // padded to max_seq_len
  std::vector<std::size_t> masked_positions;
  std::vector<std::string> masked_labels;
  bool is_random_next = false;
  std::size_t seq_len = 0;  // length before padding
  std::size_t doc_index = 0;
  std::size_t pair_index = 0;
  std::size_t dupe_index = 0;
};

struct PrepOptions {
  std::size_t max_seq_len = 128;
  std::size_t dupe_factor = 5;
  double mask_prob = 0.15;
  double random_next_prob = 0.5;
  std::uint64_t seed = 12345;
};

// max(1, round(mask_prob * words)), never more than `words`.
std::size_t masked_word_count(std::size_t words, double mask_prob);

// Emits instances ordered by (document, pair, dupe). Each document draws from
// its own RNG stream derived from (seed, document index).
std::vector<TrainingInstance> make_instances(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer,
                                             const PrepOptions& options);

std::string instance_to_json(const TrainingInstance& instance);

class LengthHistogram {
 public:
  // Bucket i covers [edges[i], edges[i+1]); the last bucket is open-ended.
  explicit LengthHistogram(std::vector<std::size_t> edges = default_edges());
  static std::vector<std::size_t> default_edges();

  void add(std::size_t length, std::uint64_t count = 1);

  const std::vector<std::size_t>& bucket_edges() const { return edges_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  const std::map<std::size_t, std::uint64_t>& exact() const { return exact_; }
  std::uint64_t total() const { return total_; }

  // Smallest length L such that at least q * total lengths are <= L.
  std::size_t quantile(double q) const;
  // Share of lengths strictly below `length`.
  double fraction_below(std::size_t length) const;

  std::string to_json() const;

 private:
  std::vector<std::size_t> edges_;
  std::vector<std::uint64_t> counts_;
  std::map<std::size_t, std::uint64_t> exact_;
  std::uint64_t total_ = 0;
};

// Untruncated lengths of the consecutive-pair sequences make_instances would
// build: 3 + |A| + |B|, or 2 + |A| for a single-sentence document.
std::vector<std::size_t> sequence_lengths(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer);

// Throws InputError when the corpus contains no sentences.
LengthHistogram length_stats(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer,
                             std::vector<std::size_t> edges = LengthHistogram::default_edges());

}  // namespace sebench::pretrain
