#include "sebench/bayes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "sebench/text.hpp"

namespace sebench::bayes {

using json = nlohmann::json;

namespace {

void check_rope(const Rope& rope) {
  if (!(rope.lo < rope.hi)) throw ConfigError("rope lower bound must be below its upper bound");
}

double parse_double(std::string_view s) {
  const std::string_view t = text::trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

double normal_variate(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Repetitions are processed in fixed-size chunks so that sums do not depend
// on the thread count.
constexpr std::size_t kChunk = 1024;

struct ChunkTotals {
  std::size_t left = 0;
  std::size_t rope = 0;
  std::size_t right = 0;
  double theta_left = 0.0;
  double theta_rope = 0.0;
  double theta_right = 0.0;
};

}  // namespace

std::string_view to_string(Method m) { return m == Method::signed_rank ? "signed-rank" : "corr-t"; }

Method parse_method(std::string_view name) {
  if (name == "signed-rank" || name == "signed_rank") return Method::signed_rank;
  if (name == "corr-t" || name == "correlated_t" || name == "correlated-t") return Method::correlated_t;
  throw ConfigError("unknown comparison method '" + std::string(name) + "' (expected signed-rank or corr-t)");
}

Rope parse_rope(std::string_view textual) {
  const std::size_t comma = textual.find(',');
  if (comma == std::string_view::npos) throw ConfigError("rope must be given as LO,HI");
  Rope r{parse_double(textual.substr(0, comma)), parse_double(textual.substr(comma + 1))};
  check_rope(r);
  return r;
}

PosteriorSummary correlated_t_test(const std::vector<double>& d, const Rope& rope, double rho) {
  check_rope(rope);
  if (d.size() < 2) throw InputError("correlated t-test needs at least two differences");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / (n - 1.0);

  PosteriorSummary s;
  s.method = Method::correlated_t;
  s.rope = rope;
  s.n = d.size();
  s.mean = mean;
  s.rho = rho;
  if (var == 0.0) {
    s.p_left = mean <= rope.lo ? 1.0 : 0.0;
    s.p_right = mean > rope.hi ? 1.0 : 0.0;
    s.p_rope = 1.0 - s.p_left - s.p_right;
    return s;
  }
  const double scale = std::sqrt(var * (1.0 / n + rho / (1.0 - rho)));
  const boost::math::students_t_distribution<double> t(n - 1.0);
  s.p_left = boost::math::cdf(t, (rope.lo - mean) / scale);
  s.p_right = boost::math::cdf(boost::math::complement(t, (rope.hi - mean) / scale));
  s.p_rope = 1.0 - (s.p_left + s.p_right);
  return s;
}

double gamma_variate(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw ConfigError("gamma shape must be positive");
  if (shape < 1.0) {
    const double u = 1.0 - rng.uniform();
    return gamma_variate(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double dd = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * dd);
  while (true) {
    double x;
    double v;
    do {
      x = normal_variate(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return dd * v;
    if (std::log(u) < 0.5 * x * x + dd * (1.0 - v + std::log(v))) return dd * v;
  }
}

PosteriorSummary signed_rank_test(const std::vector<double>& d, const Rope& rope, const SignedRankOptions& options) {
  check_rope(rope);
  if (d.empty()) throw InputError("signed-rank test needs at least one difference");
  if (options.mc_samples < 1000) throw ConfigError("signed-rank test needs at least 1000 Monte Carlo samples");
  if (!(options.prior_weight > 0.0)) throw ConfigError("prior weight must be positive");

  // z[0] is the pseudo-observation at zero.
  std::vector<double> z{0.0};
  z.insert(z.end(), d.begin(), d.end());
  const std::size_t m = z.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  std::vector<double> sorted(m);
  for (std::size_t k = 0; k < m; ++k) sorted[k] = z[order[k]];

  // For each observation i: how many sorted j satisfy (z_i + z_j)/2 < lo,
  // and how many satisfy (z_i + z_j)/2 > hi. Both predicates are monotone in
  // z_j, so the first is a prefix and the second a suffix of the sorted order.
  std::vector<std::size_t> below(m);
  std::vector<std::size_t> above(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double zi = z[i];
    below[i] = static_cast<std::size_t>(
        std::partition_point(sorted.begin(), sorted.end(), [&](double zj) { return (zi + zj) / 2.0 < rope.lo; }) -
        sorted.begin());
    above[i] = static_cast<std::size_t>(
        sorted.end() -
        std::partition_point(sorted.begin(), sorted.end(), [&](double zj) { return !((zi + zj) / 2.0 > rope.hi); }));
  }

  const std::size_t chunks = (options.mc_samples + kChunk - 1) / kChunk;
  std::vector<ChunkTotals> totals(chunks);
  auto run_chunk = [&](std::size_t c) {
    ChunkTotals& t = totals[c];
    std::vector<double> w(m);
    std::vector<double> prefix(m + 1);
    const std::size_t end = std::min(options.mc_samples, (c + 1) * kChunk);
    for (std::size_t rep = c * kChunk; rep < end; ++rep) {
      Rng rng(options.seed, rep);
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        w[i] = gamma_variate(rng, i == 0 ? options.prior_weight : 1.0);
        sum += w[i];
      }
      for (double& x : w) x /= sum;
      prefix[0] = 0.0;
      for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] + w[order[k]];
      double left = 0.0;
      double right = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        left += w[i] * prefix[below[i]];
        right += w[i] * (prefix[m] - prefix[m - above[i]]);
      }
      const double in_rope = 1.0 - left - right;
      if (left > right && left > in_rope) {
        ++t.left;
      } else if (right > left && right > in_rope) {
        ++t.right;
      } else {
        ++t.rope;
      }
      t.theta_left += left;
      t.theta_rope += in_rope;
      t.theta_right += right;
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(options.threads, 1), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    }
  }

  ChunkTotals all;
  for (const ChunkTotals& t : totals) {
    all.left += t.left;
    all.rope += t.rope;
    all.right += t.right;
    all.theta_left += t.theta_left;
    all.theta_rope += t.theta_rope;
    all.theta_right += t.theta_right;
  }
  const double n = static_cast<double>(options.mc_samples);
  PosteriorSummary s;
  s.method = Method::signed_rank;
  s.rope = rope;
  s.n = d.size();
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  s.p_left = static_cast<double>(all.left) / n;
  s.p_right = static_cast<double>(all.right) / n;
  s.p_rope = static_cast<double>(all.rope) / n;
  s.mc_samples = options.mc_samples;
  s.seed = options.seed;
  s.mean_theta = std::array<double, 3>{all.theta_left / n, all.theta_rope / n, all.theta_right / n};
  return s;
}

std::vector<double> paired_differences(const eval::EvalRun& a, const eval::EvalRun& b, std::string_view metric) {
  std::map<std::string, const eval::FoldResult*> by_id;
  for (const auto& f : b.folds) by_id[f.fold_id] = &f;
  if (a.folds.size() != b.folds.size() || by_id.size() != b.folds.size()) {
    throw InputError("result files do not cover the same folds (" + std::to_string(a.folds.size()) + " vs " +
                     std::to_string(b.folds.size()) + ")");
  }
  std::vector<double> out;
  for (const auto& fa : a.folds) {
    const auto it = by_id.find(fa.fold_id);
    if (it == by_id.end()) throw InputError("fold '" + fa.fold_id + "' is missing from the second result file");
    if (fa.failed || it->second->failed) throw InputError("fold '" + fa.fold_id + "' failed; cannot compare it");
    out.push_back(eval::fold_metric(fa, metric) - eval::fold_metric(*it->second, metric));
  }
  return out;
}

std::string to_json(const PosteriorSummary& s) {
  json j{{"method", to_string(s.method)},
         {"p_left", s.p_left},
         {"p_rope", s.p_rope},
         {"p_right", s.p_right},
         {"rope", {s.rope.lo, s.rope.hi}},
         {"n", s.n},
         {"mean_difference", s.mean}};
  if (s.rho) j["rho"] = *s.rho;
  if (s.mc_samples) j["mc_samples"] = *s.mc_samples;
  if (s.seed) j["seed"] = *s.seed;
  if (s.mean_theta) {
    j["mean_theta"] = {{"left", (*s.mean_theta)[0]}, {"rope", (*s.mean_theta)[1]}, {"right", (*s.mean_theta)[2]}};
  }
  return j.dump(2);
}

}  // namespace sebench::bayes
