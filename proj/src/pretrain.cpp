#include "sebench/pretrain.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sebench/rng.hpp"

namespace sebench::pretrain {

using json = nlohmann::json;

namespace {

using Words = std::vector<std::vector<std::string>>;

std::size_t piece_count(const Words& words) {
  std::size_t n = 0;
  for (const auto& w : words) n += w.size();
  return n;
}

bool maskable(const std::vector<std::string>& word) {
  return !(word.size() == 1 && wordpiece::is_special(word[0]));
}

void validate(const PrepOptions& o) {
  if (!(o.mask_prob > 0.0 && o.mask_prob < 1.0)) throw ConfigError("mask_prob must lie in (0, 1)");
  if (o.dupe_factor < 1) throw ConfigError("dupe_factor must be at least 1");
  if (o.max_seq_len < 3) throw ConfigError("max_seq_len must be at least 3");
  if (!(o.random_next_prob >= 0.0 && o.random_next_prob <= 1.0)) {
    throw ConfigError("random_next_prob must lie in [0, 1]");
  }
}

// Drops whole words from the end of the longer segment (B on ties) until the
// sequence fits.
void truncate_pair(Words& a, Words& b, std::size_t overhead, std::size_t max_len) {
  std::size_t na = piece_count(a);
  std::size_t nb = piece_count(b);
  while (overhead + na + nb > max_len && (!a.empty() || !b.empty())) {
    Words& longer = (nb >= na && !b.empty()) ? b : a;
    std::size_t& n = (&longer == &b) ? nb : na;
    n -= longer.back().size();
    longer.pop_back();
  }
}

}  // namespace

std::size_t masked_word_count(std::size_t words, double mask_prob) {
  if (words == 0) return 0;
  const auto rounded = static_cast<std::size_t>(std::llround(mask_prob * static_cast<double>(words)));
  return std::min(words, std::max<std::size_t>(1, rounded));
}

std::vector<TrainingInstance> make_instances(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer,
                                             const PrepOptions& options) {
  validate(options);
  std::vector<std::vector<Words>> docs;
  docs.reserve(corpus.size());
  std::vector<std::size_t> nonempty;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    std::vector<Words> sentences;
    for (const std::string& s : corpus[d]) {
      Words w = tokenizer.tokenize_words(s);
      if (!w.empty()) sentences.push_back(std::move(w));
    }
    if (!sentences.empty()) nonempty.push_back(d);
    docs.push_back(std::move(sentences));
  }

  std::vector<std::string> replacement_pool;
  for (const std::string& t : tokenizer.vocab().tokens()) {
    if (!wordpiece::is_special(t)) replacement_pool.push_back(t);
  }
  if (replacement_pool.empty()) throw ConfigError("vocabulary has no non-special tokens");

  std::vector<TrainingInstance> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& sentences = docs[d];
    if (sentences.empty()) continue;
    Rng rng(options.seed, d);
    const bool single = sentences.size() == 1;
    const std::size_t pairs = single ? 1 : sentences.size() - 1;
    for (std::size_t p = 0; p < pairs; ++p) {
      for (std::size_t dupe = 0; dupe < options.dupe_factor; ++dupe) {
        TrainingInstance inst;
        inst.doc_index = d;
        inst.pair_index = p;
        inst.dupe_index = dupe;
        Words a = sentences[p];
        Words b;
        if (!single) {
          b = sentences[p + 1];
          if (nonempty.size() > 1 && rng.uniform() < options.random_next_prob) {
            std::size_t pick = static_cast<std::size_t>(rng.below(nonempty.size() - 1));
            // Skip over the current document in the list of candidates.
            const auto self = std::lower_bound(nonempty.begin(), nonempty.end(), d) - nonempty.begin();
            if (pick >= static_cast<std::size_t>(self)) ++pick;
            const auto& other = docs[nonempty[pick]];
            b = other[static_cast<std::size_t>(rng.below(other.size()))];
            inst.is_random_next = true;
          }
        }
        truncate_pair(a, b, single ? 2 : 3, options.max_seq_len);

        // Lay out the sequence and remember each word's span.
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        inst.tokens.emplace_back(wordpiece::kCls);
        auto lay = [&](const Words& seg) {
          for (const auto& w : seg) {
            if (maskable(w)) spans.emplace_back(inst.tokens.size(), w.size());
            inst.tokens.insert(inst.tokens.end(), w.begin(), w.end());
          }
          inst.tokens.emplace_back(wordpiece::kSep);
        };
        lay(a);
        if (!single) lay(b);
        inst.seq_len = inst.tokens.size();

        const std::size_t n = masked_word_count(spans.size(), options.mask_prob);
        std::vector<std::size_t> order(spans.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        order.resize(n);
        std::sort(order.begin(), order.end());
        for (std::size_t wi : order) {
          const auto [start, len] = spans[wi];
          for (std::size_t k = start; k < start + len; ++k) {
            inst.masked_positions.push_back(k);
            inst.masked_labels.push_back(inst.tokens[k]);
            const double u = rng.uniform();
            if (u < 0.8) {
              inst.tokens[k] = std::string(wordpiece::kMask);
            } else if (u < 0.9) {
              inst.tokens[k] = replacement_pool[static_cast<std::size_t>(rng.below(replacement_pool.size()))];
            }
          }
        }
        inst.tokens.resize(options.max_seq_len, std::string(wordpiece::kPad));
        out.push_back(std::move(inst));
      }
    }
  }
  return out;
}

std::string instance_to_json(const TrainingInstance& inst) {
  json j;
  j["tokens"] = inst.tokens;
  j["masked_positions"] = inst.masked_positions;
  j["masked_labels"] = inst.masked_labels;
  j["is_random_next"] = inst.is_random_next;
  j["seq_len"] = inst.seq_len;
  j["doc"] = inst.doc_index;
  j["pair"] = inst.pair_index;
  j["dupe"] = inst.dupe_index;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Length statistics

LengthHistogram::LengthHistogram(std::vector<std::size_t> edges) : edges_(std::move(edges)) {
  if (edges_.empty()) throw ConfigError("histogram needs at least one bucket edge");
  if (!std::is_sorted(edges_.begin(), edges_.end()) ||
      std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ConfigError("histogram edges must be strictly increasing");
  }
  counts_.assign(edges_.size(), 0);
}

std::vector<std::size_t> LengthHistogram::default_edges() {
  return {0, 16, 32, 64, 96, 128, 192, 256, 384, 512};
}

void LengthHistogram::add(std::size_t length, std::uint64_t count) {
  if (count == 0) return;
  auto it = std::upper_bound(edges_.begin(), edges_.end(), length);
  // Lengths below the first edge land in the first bucket.
  const std::size_t bucket = it == edges_.begin() ? 0 : static_cast<std::size_t>(it - edges_.begin()) - 1;
  counts_[bucket] += count;
  exact_[length] += count;
  total_ += count;
}

std::size_t LengthHistogram::quantile(double q) const {
  if (total_ == 0) throw InputError("quantile of an empty histogram");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile must lie in [0, 1]");
  const double target = q * static_cast<double>(total_);
  std::uint64_t cum = 0;
  for (const auto& [len, c] : exact_) {
    cum += c;
    if (static_cast<double>(cum) >= target) return len;
  }
  return exact_.rbegin()->first;
}

double LengthHistogram::fraction_below(std::size_t length) const {
  if (total_ == 0) return 0.0;
  std::uint64_t below = 0;
  for (const auto& [len, c] : exact_) {
    if (len >= length) break;
    below += c;
  }
  return static_cast<double>(below) / static_cast<double>(total_);
}

std::string LengthHistogram::to_json() const {
  json j;
  j["total"] = total_;
  j["bucket_edges"] = edges_;
  j["counts"] = counts_;
  json exact = json::object();
  for (const auto& [len, c] : exact_) exact[std::to_string(len)] = c;
  j["exact"] = exact;
  if (total_ > 0) {
    j["quantiles"] = {{"0.5", quantile(0.5)}, {"0.9", quantile(0.9)}, {"0.99", quantile(0.99)}, {"1.0", quantile(1.0)}};
    j["fraction_below"] = {{"128", fraction_below(128)}, {"256", fraction_below(256)}, {"512", fraction_below(512)}};
  }
  return j.dump(2);
}

std::vector<std::size_t> sequence_lengths(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer) {
  std::vector<std::size_t> lengths;
  for (const auto& doc : corpus) {
    std::vector<std::size_t> sizes;
    for (const std::string& s : doc) {
      const std::size_t n = tokenizer.tokenize(s).size();
      if (n > 0) sizes.push_back(n);
    }
    if (sizes.size() == 1) {
      lengths.push_back(2 + sizes[0]);
    } else {
      for (std::size_t i = 0; i + 1 < sizes.size(); ++i) lengths.push_back(3 + sizes[i] + sizes[i + 1]);
    }
  }
  return lengths;
}

LengthHistogram length_stats(const Corpus& corpus, const wordpiece::Tokenizer& tokenizer,
                             std::vector<std::size_t> edges) {
  const std::vector<std::size_t> lengths = sequence_lengths(corpus, tokenizer);
  if (lengths.empty()) throw InputError("cannot compute length statistics of an empty corpus");
  LengthHistogram h(std::move(edges));
  for (std::size_t len : lengths) h.add(len);
  return h;
}

}  // namespace sebench::pretrain
