#include <doctest.h>

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "oracles.hpp"
#include "sebench/bayes.hpp"
#include "support.hpp"

using namespace sebench;
using namespace sebench::bayes;

namespace {

std::vector<double> difference_set(int which) {
  std::vector<double> d;
  switch (which) {
    case 0:  // 100 values around +0.02
      for (int i = 0; i < 100; ++i) d.push_back(0.02 + 0.015 * std::sin(0.7 * i) + 0.002 * (i % 3));
      break;
    case 1:  // 10 folds straddling the rope
      d = {0.012, -0.004, 0.020, 0.007, -0.011, 0.015, 0.003, 0.009, -0.002, 0.018};
      break;
    default:  // 30 values clearly negative with a wide spread
      for (int i = 0; i < 30; ++i) d.push_back(-0.05 + 0.04 * std::cos(1.3 * i));
      break;
  }
  return d;
}

std::vector<double> negated(std::vector<double> d) {
  for (double& x : d) x = -x;
  return d;
}

std::vector<double> scaled(std::vector<double> d, double c) {
  for (double& x : d) x *= c;
  return d;
}

void check_simplex(const PosteriorSummary& s) {
  CHECK(s.p_left >= 0.0);
  CHECK(s.p_rope >= 0.0);
  CHECK(s.p_right >= 0.0);
  CHECK(std::fabs(s.p_left + s.p_rope + s.p_right - 1.0) <= 1e-9);
}

eval::EvalRun run_with(std::vector<std::pair<std::string, double>> folds) {
  eval::EvalRun r;
  for (const auto& [id, f1] : folds) {
    eval::FoldResult f;
    f.fold_id = id;
    f.f1 = f1;
    f.macro_f1 = f1 / 2;
    r.folds.push_back(f);
  }
  return r;
}

}  // namespace

TEST_SUITE("bayes") {
  TEST_CASE("names and ropes") {
    CHECK(parse_method("signed-rank") == Method::signed_rank);
    CHECK(parse_method("corr-t") == Method::correlated_t);
    CHECK_THROWS_AS(parse_method("wilcoxon"), ConfigError);
    const Rope r = parse_rope("-0.01,0.02");
    CHECK(r.lo == -0.01);
    CHECK(r.hi == 0.02);
    CHECK_THROWS_AS(parse_rope("0.1,0.1"), ConfigError);
    CHECK_THROWS_AS(parse_rope("0.1"), ConfigError);
    CHECK_THROWS_AS(parse_rope("a,b"), ConfigError);
  }

  TEST_CASE("correlated t matches quadrature") {
    for (int which = 0; which < 3; ++which) {
      const auto d = difference_set(which);
      for (double rho : {0.0, 0.1, 0.5}) {
        const Rope rope{-0.01, 0.01};
        const auto s = correlated_t_test(d, rope, rho);
        const auto o = oracle::correlated_t(d, rope.lo, rope.hi, rho);
        CHECK(std::fabs(s.p_left - o[0]) <= 1e-6);
        CHECK(std::fabs(s.p_rope - o[1]) <= 1e-6);
        CHECK(std::fabs(s.p_right - o[2]) <= 1e-6);
        check_simplex(s);
      }
    }
  }

  TEST_CASE("point mass cases") {
    const Rope rope{-0.01, 0.01};
    const auto zero = correlated_t_test(std::vector<double>(10, 0.0), rope);
    CHECK(zero.p_rope == 1.0);
    CHECK(zero.p_left == 0.0);
    const auto right = correlated_t_test(std::vector<double>(10, 0.5), rope);
    CHECK(right.p_right == 1.0);
    const auto left = correlated_t_test(std::vector<double>(5, -0.5), rope);
    CHECK(left.p_left == 1.0);
    const auto edge = correlated_t_test(std::vector<double>(5, 0.01), rope);
    CHECK(edge.p_rope == 1.0);
  }

  TEST_CASE("correlated t errors") {
    CHECK_THROWS_AS(correlated_t_test({0.1}, {}), InputError);
    CHECK_THROWS_AS(correlated_t_test({0.1, 0.2}, {0.1, -0.1}), ConfigError);
    CHECK_THROWS_AS(correlated_t_test({0.1, 0.2}, {}, 1.0), ConfigError);
  }

  TEST_CASE("negation swaps the tails exactly") {
    for (int which = 0; which < 3; ++which) {
      const auto d = difference_set(which);
      const auto s = correlated_t_test(d, {-0.01, 0.02});
      const auto m = correlated_t_test(negated(d), {-0.02, 0.01});
      CHECK(m.p_left == s.p_right);
      CHECK(m.p_right == s.p_left);
    }
  }

  TEST_CASE("joint scaling leaves the t posterior unchanged") {
    for (int which = 0; which < 3; ++which) {
      const auto d = difference_set(which);
      const Rope rope{-0.01, 0.01};
      const auto s = correlated_t_test(d, rope);
      for (double c : {2.0, 0.25, 1024.0}) {
        const auto t = correlated_t_test(scaled(d, c), {rope.lo * c, rope.hi * c});
        CHECK(t.p_left == s.p_left);
        CHECK(t.p_rope == s.p_rope);
        CHECK(t.p_right == s.p_right);
      }
      for (double c : {3.0, 0.7, 123.456}) {
        const auto t = correlated_t_test(scaled(d, c), {rope.lo * c, rope.hi * c});
        CHECK(std::fabs(t.p_left - s.p_left) <= 1e-12);
        CHECK(std::fabs(t.p_rope - s.p_rope) <= 1e-12);
        CHECK(std::fabs(t.p_right - s.p_right) <= 1e-12);
      }
    }
  }

  TEST_CASE("random difference sets keep the simplex") {
    testing::Gen g(71);
    for (int i = 0; i < 300; ++i) {
      std::vector<double> d(g.in(2, 60));
      for (double& x : d) x = g.real(-0.2, 0.2);
      const double lo = g.real(-0.1, 0.05);
      const Rope rope{lo, lo + g.real(0.001, 0.1)};
      check_simplex(correlated_t_test(d, rope, g.real(0.0, 0.9)));
    }
  }

  TEST_CASE("signed rank reproducibility and threads") {
    const auto d = difference_set(1);
    SignedRankOptions o;
    o.mc_samples = 20000;
    o.seed = 9;
    const auto a = signed_rank_test(d, {-0.01, 0.01}, o);
    const auto b = signed_rank_test(d, {-0.01, 0.01}, o);
    CHECK(to_json(a) == to_json(b));
    o.threads = 4;
    CHECK(to_json(signed_rank_test(d, {-0.01, 0.01}, o)) == to_json(a));
    o.seed = 10;
    CHECK(to_json(signed_rank_test(d, {-0.01, 0.01}, o)) != to_json(a));
    check_simplex(a);
    REQUIRE(a.mean_theta.has_value());
    const auto& th = *a.mean_theta;
    CHECK(std::fabs(th[0] + th[1] + th[2] - 1.0) <= 1e-9);
  }

  TEST_CASE("signed rank symmetry") {
    const std::vector<double> d{-0.05, 0.05, -0.02, 0.02, -0.1, 0.1, -0.03, 0.03};
    SignedRankOptions o;
    o.mc_samples = 50000;
    o.seed = 3;
    o.threads = 4;
    const auto s = signed_rank_test(d, {-0.01, 0.01}, o);
    CHECK(std::fabs(s.p_left - s.p_right) <= 0.02);
    check_simplex(s);
  }

  TEST_CASE("signed rank negation") {
    const auto d = difference_set(1);
    SignedRankOptions o;
    o.mc_samples = 50000;
    o.threads = 4;
    const auto s = signed_rank_test(d, {-0.01, 0.01}, o);
    const auto m = signed_rank_test(negated(d), {-0.01, 0.01}, o);
    CHECK(std::fabs(m.p_left - s.p_right) <= 0.02);
    CHECK(std::fabs(m.p_right - s.p_left) <= 0.02);
  }

  TEST_CASE("signed rank scaling") {
    const auto d = difference_set(1);
    SignedRankOptions o;
    o.mc_samples = 5000;
    const auto s = signed_rank_test(d, {-0.01, 0.01}, o);
    const auto t = signed_rank_test(scaled(d, 4.0), {-0.04, 0.04}, o);
    CHECK(t.p_left == s.p_left);
    CHECK(t.p_rope == s.p_rope);
    CHECK(t.p_right == s.p_right);
  }

  TEST_CASE("signed rank with everything far right") {
    SignedRankOptions o;
    o.mc_samples = 20000;
    const auto s = signed_rank_test(std::vector<double>(10, 1.0), {-0.01, 0.01}, o);
    CHECK(s.p_right >= 0.99);
    const auto one = signed_rank_test({1.0}, {-0.01, 0.01}, o);
    check_simplex(one);
  }

  TEST_CASE("signed rank agrees with an independent Monte Carlo") {
    const std::vector<double> d{0.03, 0.05, -0.01, 0.02, 0.04, 0.0, 0.06, -0.02, 0.035, 0.015};
    SignedRankOptions o;
    o.mc_samples = 100000;
    o.threads = 4;
    const auto s = signed_rank_test(d, {-0.01, 0.01}, o);
    const auto want = oracle::signed_rank_mc(d, -0.01, 0.01, 100000, 0.5, 20240611);
    CHECK(std::fabs(s.p_left - want[0]) <= 0.01);
    CHECK(std::fabs(s.p_rope - want[1]) <= 0.01);
    CHECK(std::fabs(s.p_right - want[2]) <= 0.01);
  }

  TEST_CASE("signed rank errors") {
    SignedRankOptions o;
    CHECK_THROWS_AS(signed_rank_test({}, {}, o), InputError);
    CHECK_THROWS_AS(signed_rank_test({0.1}, {0.1, 0.0}, o), ConfigError);
    o.mc_samples = 999;
    CHECK_THROWS_AS(signed_rank_test({0.1}, {}, o), ConfigError);
    o.mc_samples = 1000;
    o.prior_weight = 0.0;
    CHECK_THROWS_AS(signed_rank_test({0.1}, {}, o), ConfigError);
  }

  TEST_CASE("gamma variates have the right moments") {
    for (double shape : {0.5, 1.0, 3.0}) {
      Rng rng(static_cast<std::uint64_t>(shape * 100));
      const int n = 200000;
      double sum = 0.0;
      double sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = gamma_variate(rng, shape);
        CHECK_FALSE(x < 0.0);
        sum += x;
        sq += x * x;
      }
      const double mean = sum / n;
      const double var = sq / n - mean * mean;
      CHECK(mean == doctest::Approx(shape).epsilon(0.02));
      CHECK(var == doctest::Approx(shape).epsilon(0.05));
    }
    Rng rng(1);
    CHECK_THROWS_AS(gamma_variate(rng, 0.0), ConfigError);
  }

  TEST_CASE("paired differences") {
    const auto a = run_with({{"f2", 0.8}, {"f1", 0.6}});
    const auto b = run_with({{"f1", 0.5}, {"f2", 0.9}});
    const auto d = paired_differences(a, b, "f1");
    REQUIRE(d.size() == 2);
    CHECK(d[0] == doctest::Approx(-0.1));
    CHECK(d[1] == doctest::Approx(0.1));
    CHECK(paired_differences(a, b, "macro_f1")[0] == doctest::Approx(-0.05));
    CHECK_THROWS_AS(paired_differences(a, run_with({{"f1", 0.5}}), "f1"), InputError);
    CHECK_THROWS_AS(paired_differences(a, run_with({{"f1", 0.5}, {"f3", 0.5}}), "f1"), InputError);
    auto failed = b;
    failed.folds[0].failed = true;
    CHECK_THROWS_AS(paired_differences(a, failed, "f1"), InputError);
    CHECK_THROWS_AS(paired_differences(a, b, "auc"), ConfigError);
  }

  TEST_CASE("summary json") {
    const auto s = correlated_t_test(difference_set(0), {-0.01, 0.01});
    const auto j = nlohmann::json::parse(to_json(s));
    CHECK(j.at("method") == "corr-t");
    CHECK(j.at("p_left").get<double>() == s.p_left);
    CHECK(j.at("rope").at(0).get<double>() == -0.01);
    CHECK(j.at("rho").get<double>() == 0.1);
    CHECK_FALSE(j.contains("mc_samples"));
  }
}
