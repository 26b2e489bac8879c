#pragma once

// Small estimators shared by the Monte Carlo harness.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rwre::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> x);

struct HillEstimate {
  double index = 0.0;  // tail index alpha in P{X > x} ~ C x^{-alpha}
  double se = 0.0;     // asymptotic alpha / sqrt(k)
  std::size_t k = 0;
};

// Hill estimator on the k largest positive values.
HillEstimate hill(std::span<const double> x, std::size_t k);

// k = floor(n^0.6), the harness default.
std::size_t default_hill_k(std::size_t n);

// Sensitivity sweep: Hill at k * f for each factor f.
std::vector<HillEstimate> hill_sweep(std::span<const double> x, std::size_t k, std::span<const double> factors);

// sup_x |F_n(x) - G_m(x)| between two samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// sup_x |F_n(x) - F(x)| against a continuous CDF.
double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf);

// Dvoretzky-Kiefer-Wolfowitz half-width: P{sup|F_n - F| > eps} <= alpha.
double dkw_epsilon(std::size_t n, double alpha = 0.05);

// Empirical CDF of `sample` evaluated on `grid`.
std::vector<double> empirical_cdf(std::vector<double> sample, std::span<const double> grid);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = intercept + slope x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

// Weighted least squares with weights 1/sigma_i^2.
LinearFit weighted_least_squares(std::span<const double> x, std::span<const double> y, std::span<const double> sigma);

// Standard deviation of `stat` over B bootstrap resamples drawn with a
// deterministic stream.
double bootstrap_se(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                    std::size_t resamples, std::uint64_t seed);

// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace rwre::stats
