#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "sebench/text.hpp"
#include "sebench/wordpiece.hpp"

namespace oracle {

std::vector<std::string> naive_train(const std::vector<std::string>& sentences, std::size_t target_size,
                                     std::size_t min_frequency, std::size_t max_word_chars) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& s : sentences) {
    for (const auto& w : sebench::wordpiece::basic_split(s, false)) {
      if (sebench::wordpiece::is_special(w)) continue;
      if (sebench::text::decode(w).size() > max_word_chars) continue;
      ++counts[w];
    }
  }
  // Each word as a list of pieces.
  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
  std::set<std::string> bare;
  std::set<std::string> cont;
  for (const auto& [w, c] : counts) {
    std::vector<std::string> pieces;
    const std::u32string cps = sebench::text::decode(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string p = i == 0 ? "" : "##";
      sebench::text::append_utf8(p, cps[i]);
      (i == 0 ? bare : cont).insert(p);
      pieces.push_back(p);
    }
    words.emplace_back(pieces, c);
  }
  std::vector<std::string> vocab(sebench::wordpiece::kSpecialTokens.begin(), sebench::wordpiece::kSpecialTokens.end());
  std::set<std::string> have(vocab.begin(), vocab.end());
  for (const auto& p : bare) {
    if (have.insert(p).second) vocab.push_back(p);
  }
  for (const auto& p : cont) {
    if (have.insert(p).second) vocab.push_back(p);
  }

  while (vocab.size() < target_size) {
    std::map<std::string, std::uint64_t> freq;
    std::map<std::pair<std::string, std::string>, std::uint64_t> pairs;
    for (const auto& [pieces, c] : words) {
      for (const auto& p : pieces) freq[p] += c;
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) pairs[{pieces[i], pieces[i + 1]}] += c;
    }
    bool found = false;
    std::pair<std::string, std::string> best;
    std::uint64_t best_f = 0;
    unsigned __int128 best_d = 1;
    std::string best_m;
    for (const auto& [pr, f] : pairs) {
      if (f < std::max<std::size_t>(min_frequency, 1)) continue;
      const unsigned __int128 d = static_cast<unsigned __int128>(freq[pr.first]) * freq[pr.second];
      const std::string m = pr.first + pr.second.substr(2);
      bool take = !found;
      if (found) {
        const unsigned __int128 l = static_cast<unsigned __int128>(f) * best_d;
        const unsigned __int128 r = static_cast<unsigned __int128>(best_f) * d;
        if (l != r) take = l > r;
        else if (m != best_m) take = m < best_m;
        else take = pr < best;
      }
      if (take) {
        found = true;
        best = pr;
        best_f = f;
        best_d = d;
        best_m = m;
      }
    }
    if (!found) return {};
    for (auto& [pieces, c] : words) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (i + 1 < pieces.size() && pieces[i] == best.first && pieces[i + 1] == best.second) {
          out.push_back(best_m);
          ++i;
        } else {
          out.push_back(pieces[i]);
        }
      }
      pieces = out;
    }
    if (have.insert(best_m).second) vocab.push_back(best_m);
  }
  return vocab;
}

std::vector<std::string> naive_wordpiece(const std::vector<std::string>& vocab, const std::string& word) {
  const std::set<std::string> v(vocab.begin(), vocab.end());
  const std::u32string cps = sebench::text::decode(word);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string found;
    while (end > start) {
      std::string piece = start == 0 ? "" : "##";
      piece += sebench::text::encode(cps.substr(start, end - start));
      if (v.count(piece)) {
        found = piece;
        break;
      }
      --end;
    }
    if (found.empty()) return {"[UNK]"};
    out.push_back(found);
    start = end;
  }
  return out;
}

namespace {

double t_density(double t, double dof) {
  const double logc = std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) - 0.5 * std::log(dof * M_PI);
  return std::exp(logc - (dof + 1.0) / 2.0 * std::log1p(t * t / dof));
}

template <class F>
double simpson(F f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

double student_t_cdf(double x, double dof) {
  const double ax = std::fabs(x);
  auto f = [dof](double t) { return t_density(t, dof); };
  double upper;  // mass in [0, ax]
  if (ax <= 1.0) {
    upper = simpson(f, 0.0, ax, 20000);
  } else {
    // Tail beyond ax through t = 1/s, which maps it onto (0, 1/ax].
    auto g = [dof](double s) { return s == 0.0 ? 0.0 : t_density(1.0 / s, dof) / (s * s); };
    upper = 0.5 - simpson(g, 0.0, 1.0 / ax, 20000);
  }
  return x >= 0 ? 0.5 + upper : 0.5 - upper;
}

std::array<double, 3> correlated_t(const std::vector<double>& d, double lo, double hi, double rho) {
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / (n - 1.0);
  const double scale = std::sqrt(var * (1.0 / n + rho / (1.0 - rho)));
  const double cl = student_t_cdf((lo - mean) / scale, n - 1.0);
  const double ch = student_t_cdf((hi - mean) / scale, n - 1.0);
  return {cl, ch - cl, 1.0 - ch};
}

std::array<double, 3> signed_rank_mc(const std::vector<double>& d, double lo, double hi, std::size_t samples,
                                     double prior_weight, std::uint64_t seed) {
  std::vector<double> z{0.0};
  z.insert(z.end(), d.begin(), d.end());
  const std::size_t m = z.size();
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> g0(prior_weight, 1.0);
  std::gamma_distribution<double> g1(1.0, 1.0);
  std::array<double, 3> wins{0, 0, 0};
  std::vector<double> w(m);
  for (std::size_t s = 0; s < samples; ++s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = i == 0 ? g0(gen) : g1(gen);
      sum += w[i];
    }
    double left = 0.0;
    double right = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double avg = (z[i] + z[j]) / 2.0;
        const double ww = (w[i] / sum) * (w[j] / sum);
        if (avg < lo) left += ww;
        if (avg > hi) right += ww;
      }
    }
    const double rope = 1.0 - left - right;
    if (left > right && left > rope) wins[0] += 1;
    else if (right > left && right > rope) wins[2] += 1;
    else wins[1] += 1;
  }
  for (double& x : wins) x /= static_cast<double>(samples);
  return wins;
}

std::size_t quantile_by_sort(std::vector<std::size_t> values, double q) {
  std::sort(values.begin(), values.end());
  const double need = q * static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (static_cast<double>(i + 1) >= need) return values[i];
  }
  return values.back();
}

double fraction_below_by_count(const std::vector<std::size_t>& values, std::size_t length) {
  std::size_t below = 0;
  for (std::size_t v : values) below += v < length ? 1 : 0;
  return static_cast<double>(below) / static_cast<double>(values.size());
}

using namespace sebench::corpus;
namespace text = sebench::text;

// The step table written out by hand, one row per source.
bool table_enabled(Source src, Step step) {
  using S = Step;
  switch (src) {
    case Source::github_issue:
      return step == S::basic || step == S::english || step == S::markdown || step == S::hashes || step == S::code ||
             step == S::user_mentions;
    case Source::commit_message:
      return step == S::basic || step == S::english || step == S::hashes || step == S::special_formatting;
    case Source::stackoverflow:
      return step == S::basic || step == S::html || step == S::hashes || step == S::code || step == S::user_mentions;
    case Source::jira_issue:
      return step == S::basic || step == S::hashes || step == S::code || step == S::special_formatting;
  }
  return false;
}

// Composes the public step functions by hand for each source.
CleanDocument compose_pipeline(const Document& d) {
  CleanDocument c;
  c.id = d.id;
  c.source = d.source;
  const StopwordDetector det(0.06);
  std::string t = normalize_basic(d.text);
  switch (d.source) {
    case Source::github_issue:
      if (!detect_english(t, det)) {
        c.dropped = true;
        c.drop_reason = DropReason::non_english;
        return c;
      }
      t = mask_user_mentions(mask_hashes(strip_markdown(t, true)));
      break;
    case Source::commit_message:
      if (!detect_english(t, det)) {
        c.dropped = true;
        c.drop_reason = DropReason::non_english;
        return c;
      }
      t = strip_special_formatting(mask_hashes(t), Source::commit_message, false);
      break;
    case Source::stackoverflow:
      t = mask_user_mentions(mask_hashes(strip_html(t, true)));
      break;
    case Source::jira_issue:
      t = strip_special_formatting(mask_hashes(t), Source::jira_issue, true);
      break;
  }
  c.sentences = split_sentences(text::collapse_whitespace(t));
  if (c.sentences.empty()) {
    c.dropped = true;
    c.drop_reason = DropReason::empty_after_cleaning;
  }
  return c;
}

std::string hash_rule(std::string_view in) {
  static const std::regex kHex("^([^A-Za-z0-9]*)([0-9a-f]{7,})([^A-Za-z0-9]*)$");
  std::vector<std::string> out;
  for (std::string_view tok : text::split_whitespace(in)) {
    const std::string s(tok);
    std::smatch m;
    out.push_back(std::regex_match(s, m, kHex) ? m[1].str() + "[HASH]" + m[3].str() : s);
  }
  return text::join(out, " ");
}

}  // namespace oracle
