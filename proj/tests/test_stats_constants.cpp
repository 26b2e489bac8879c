#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rwre/constants.hpp"
#include "rwre/error.hpp"
#include "rwre/special_functions.hpp"
#include "rwre/stats.hpp"
#include "support/oracles.hpp"

using namespace rwre;

TEST_SUITE("stats") {
  TEST_CASE("mean and standard error") {
    const std::vector<double> x = {1, 2, 3, 4};
    const auto m = stats::mean_se(x);
    CHECK(m.mean == 2.5);
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  }

  TEST_CASE("Hill estimator on exact Pareto quantiles") {
    // X = U^{-1/alpha} on a deterministic grid of U
    const std::size_t n = 100000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::pow((i + 0.5) / n, -1.0 / 0.5);
    const auto h = stats::hill(x, stats::default_hill_k(n));
    CHECK(stats::default_hill_k(n) == static_cast<std::size_t>(std::floor(std::pow(1e5, 0.6))));
    CHECK(h.index == doctest::Approx(0.5).epsilon(0.02));
    const double f[] = {0.5, 1.0, 2.0};
    const auto sweep = stats::hill_sweep(x, h.k, f);
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[1].index == h.index);
    CHECK(sweep[0].k == h.k / 2);
  }

  TEST_CASE("KS distances and the DKW band") {
    const std::vector<double> a = {1, 2, 3, 4}, b = {1, 2, 3, 4};
    CHECK(stats::ks_two_sample(a, b) == 0.0);
    CHECK(stats::ks_two_sample({1, 2}, {3, 4}) == 1.0);
    std::vector<double> u(1000);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = (i + 0.5) / 1000.0;
    CHECK(stats::ks_one_sample(u, [](double t) { return std::clamp(t, 0.0, 1.0); }) == doctest::Approx(0.0005));
    CHECK(stats::dkw_epsilon(1000) == doctest::Approx(std::sqrt(std::log(2.0 / 0.05) / 2000.0)));
    const auto cdf = stats::empirical_cdf({3, 1, 2}, std::vector<double>{0.5, 1, 2.5, 3});
    CHECK(cdf == std::vector<double>{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});
  }

  TEST_CASE("least squares") {
    const std::vector<double> x = {0, 1, 2, 3}, y = {1, 3, 5, 7};
    const auto f = stats::least_squares(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
    const std::vector<double> s = {1, 1, 1, 1};
    CHECK(stats::weighted_least_squares(x, y, s).slope == doctest::Approx(2.0));
  }

  TEST_CASE("bootstrap is deterministic and close to the textbook SE") {
    std::vector<double> x(2000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i) * 1.7);
    auto mean = [](std::span<const double> v) {
      double s = 0;
      for (double e : v) s += e;
      return s / static_cast<double>(v.size());
    };
    const double b1 = stats::bootstrap_se(x, mean, 400, 5);
    CHECK(b1 == stats::bootstrap_se(x, mean, 400, 5));
    CHECK(b1 == doctest::Approx(stats::mean_se(x).se).epsilon(0.15));
  }

  TEST_CASE("normal distribution") {
    CHECK(stats::normal_cdf(0.0) == 0.5);
    CHECK(stats::normal_quantile(0.975) == doctest::Approx(oracle::kNormalQuantile_0_975).epsilon(1e-13));
    CHECK(stats::normal_quantile(1e-6) == doctest::Approx(oracle::kNormalQuantile_1e_6).epsilon(1e-12));
    for (double p : {0.01, 0.3, 0.77}) CHECK(stats::normal_cdf(stats::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_SUITE("constants") {
  const auto kBeta = EnvironmentLaw::parse("beta:1.5,1.0");

  TEST_CASE("Kesten constant closed form") {
    CHECK(kesten_constant_beta(1.5, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(kesten_constant_beta(2.0, 1.5) == doctest::Approx(oracle::kKestenBeta_2_1_5).epsilon(1e-13));
    CHECK(kesten_constant_beta(1.2, 1.1) == doctest::Approx(oracle::kKestenBeta_1_2_1_1).epsilon(1e-12));
    CHECK(kesten_constant_beta(1.2, 1.1) == doctest::Approx(10.0 / std::exp(log_beta(1.2, 1.1))).epsilon(1e-12));
  }

  TEST_CASE("limit scales") {
    const auto p = limit_params_for(kBeta);
    CHECK(p.kappa == 0.5);
    CHECK(p.c_k == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(p.moment == doctest::Approx(2.0 - 2.0 * std::numbers::ln2).epsilon(1e-12));
    CHECK(std::abs(p.lambda_scale - oracle::kLambdaStarBeta) <= 1e-6);
    CHECK(p.lambda_scale == doctest::Approx(oracle::kLambdaStarBeta).epsilon(1e-12));
    CHECK(std::abs(p.x_scale * p.lambda_scale - 1.0) <= 1e-12);
    CHECK(p.tau_prefactor == doctest::Approx(p.lambda_scale * p.lambda_scale).epsilon(1e-14));
    CHECK(beta_lambda_scale(1.5, 1.0) == doctest::Approx(p.lambda_scale).epsilon(1e-12));
    CHECK(limit_params_for(EnvironmentLaw::parse("beta:2,1.5")).lambda_scale ==
          doctest::Approx(oracle::kLambdaStarBeta_2_1_5).epsilon(1e-11));
    CHECK(limit_params_for(EnvironmentLaw::parse("beta:1.2,1.1")).lambda_scale ==
          doctest::Approx(oracle::kLambdaStarBeta_1_2_1_1).epsilon(1e-10));
    CHECK(beta_lambda_scale(1.2, 1.1) ==
          doctest::Approx(limit_params_for(EnvironmentLaw::parse("beta:1.2,1.1")).lambda_scale).epsilon(1e-11));
    CHECK_THROWS_AS(limit_params_for(EnvironmentLaw::parse("discrete:0.8@0.6;0.25@0.4")), ConfigError);
    CHECK(limit_params_for(EnvironmentLaw::parse("discrete:0.8@0.6;0.25@0.4"), 2.0).c_k == 2.0);
  }

  TEST_CASE("algebra of the derived constants") {
    CHECK(feller_constant(1.0, 0.5) == 2.0);
    CHECK(feller_constant(0.3, 0.25) == doctest::Approx(0.4));
    CHECK_THROWS_AS(feller_constant(0.3, 0.0), DomainError);
    CHECK_THROWS_AS(feller_constant(0.3, 1.0), DomainError);
    CHECK(meander_moment(1.7, 1.7) == 1.0);
    const double ci = 0.27, cf = 0.62, ck = 3.0;
    CHECK(c_u(ci, meander_moment(ck, cf)) * cf == doctest::Approx(ci * ck).epsilon(1e-15));
    CHECK_THROWS_AS(meander_moment(0.0, 1.0), DomainError);
  }

  TEST_CASE("Iglehart constant: two seeds agree and match the height census") {
    const double mom = moment_rho_log(kBeta, 0.5);
    const auto s1 = sample_excursions(kBeta, {400000, 1, 1});
    const auto s2 = sample_excursions(kBeta, {400000, 2, 1});
    const auto e1 = iglehart_from_sample(s1, 0.5, mom);
    const auto e2 = iglehart_from_sample(s2, 0.5, mom);
    CHECK(std::abs(e1.c_i - e2.c_i) <= 3.0 * std::hypot(e1.c_i_se, e2.c_i_se));
    CHECK(s1.flagged == 0);
    std::vector<double> grid;
    for (double h = 4.0; h <= 8.0 + 1e-9; h += 0.5) grid.push_back(h);
    const auto census = exponential_tail_census(s1.height, 0.5, grid);
    for (std::size_t i = 1; i < census.raw_tail.size(); ++i) CHECK(census.raw_tail[i] <= census.raw_tail[i - 1]);
    CHECK(std::abs(census.constant_hat / e1.c_i - 1.0) <= 0.15);
    // E[e_1] and E[e^{kV(e_1)}] near their reference values
    CHECK(e1.mean_e1 == doctest::Approx(2.296).epsilon(0.02));
    CHECK(e1.e_kv == doctest::Approx(0.565).epsilon(0.01));
  }

  TEST_CASE("Feller constant matches the supremum tail") {
    const double mom = moment_rho_log(kBeta, 0.5);
    const auto ig = iglehart_from_sample(sample_excursions(kBeta, {400000, 3, 1}), 0.5, mom);
    const double cf = feller_constant(ig.c_i, ig.e_kv);
    const auto sup = sample_supremum(kBeta, {200000, 4, 1});
    std::vector<double> grid;
    for (double h = 3.0; h <= 6.0 + 1e-9; h += 0.5) grid.push_back(h);
    const auto census = exponential_tail_census(sup, 0.5, grid);
    CHECK(std::abs(census.constant_hat / cf - 1.0) <= 0.15);
  }

  TEST_CASE("perpetuity sampler on a small run") {
    KestenOptions o;
    o.n_series = 200000;
    o.seed = 3;
    o.bootstrap = 50;
    const auto t = kesten_tail_estimate(kBeta, 0.5, o);
    CHECK(t.n == 200000);
    for (std::size_t i = 1; i < t.raw_tail.size(); ++i) CHECK(t.raw_tail[i] <= t.raw_tail[i - 1]);
    CHECK(t.index_hat == doctest::Approx(0.5).epsilon(0.2));
    // the power-tail prefactor sits near 1 for this law, not at the closed form 3
    CHECK(t.constant_hat == doctest::Approx(oracle::kPerpetuityTailBeta).epsilon(0.25));
    KestenOptions again = o;
    CHECK(kesten_tail_estimate(kBeta, 0.5, again).constant_hat == t.constant_hat);
  }

  TEST_CASE("splitting estimator of the excursion-height tail") {
    // crude Monte Carlo reference at a moderate level
    const auto s = sample_excursions(kBeta, {1000000, 8, 1});
    std::size_t hits = 0;
    for (double h : s.height) hits += h >= 5.0;
    const double crude = static_cast<double>(hits) / s.height.size();
    const double crude_se = std::sqrt(crude * (1 - crude) / s.height.size());
    const auto q = excursion_tail_splitting(kBeta, 0.5, 5.0, 20000, 20, 9);
    CHECK(q.levels >= 2);
    CHECK(std::abs(q.q - crude) <= 3.0 * std::hypot(q.se, crude_se));
    CHECK(excursion_tail_splitting(kBeta, 0.5, 5.0, 20000, 20, 9).q == q.q);
  }
}
