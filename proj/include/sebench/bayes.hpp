#pragma once

// Bayesian comparison of two classifiers from paired per-fold scores:
// the correlated t-test for cross-validation and the signed-rank test.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sebench/error.hpp"
#include "sebench/eval.hpp"
#include "sebench/rng.hpp"

namespace sebench::bayes {

enum class Method { signed_rank, correlated_t };
std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct Rope {
  double lo = -0.01;
  double hi = 0.01;
};

// "LO,HI"; throws ConfigError unless lo < hi.
Rope parse_rope(std::string_view text);

struct PosteriorSummary {
  Method method = Method::correlated_t;
  double p_left = 0.0;
  double p_rope = 0.0;
  double p_right = 0.0;
  Rope rope;
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> rho;
  std::optional<std::size_t> mc_samples;
  std::optional<std::uint64_t> seed;
  // Signed-rank only: average theta_left, theta_rope, theta_right.
  std::optional<std::array<double, 3>> mean_theta;
};

// Posterior of the mean difference: Student-t with n-1 degrees of freedom,
// location mean(d), scale^2 = var(d) * (1/n + rho/(1-rho)). Zero variance
// gives a point mass at the mean. Throws InputError for n < 2.
PosteriorSummary correlated_t_test(const std::vector<double>& d, const Rope& rope, double rho = 0.1);

struct SignedRankOptions {
  std::size_t mc_samples = 50000;
  double prior_weight = 0.5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Dirichlet(s, 1, ..., 1) weights over {0, d_1..d_n}; each repetition counts
// for the region whose theta is strictly greatest, ties go to the rope.
PosteriorSummary signed_rank_test(const std::vector<double>& d, const Rope& rope, const SignedRankOptions& options);

// Gamma(shape, 1) variate (Marsaglia-Tsang), driven by the portable RNG.
double gamma_variate(Rng& rng, double shape);

// metric_A - metric_B per fold, matched by fold id in the order of `a`.
// Throws InputError when fold sets differ or a fold failed in either run.
std::vector<double> paired_differences(const eval::EvalRun& a, const eval::EvalRun& b, std::string_view metric);

std::string to_json(const PosteriorSummary& summary);

}  // namespace sebench::bayes
