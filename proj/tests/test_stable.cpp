#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rwre/constants.hpp"
#include "rwre/kernels.hpp"
#include "rwre/stable.hpp"
#include "rwre/stats.hpp"
#include "support/oracles.hpp"

using namespace rwre;

namespace {

double laplace_mean(const std::vector<double>& x, double lambda, double* se) {
  const auto s = kernels::laplace_sums(x, lambda);
  const double n = static_cast<double>(x.size());
  const double m = s.sum / n;
  *se = std::sqrt((s.sum_sq / n - m * m) / (n - 1));
  return m;
}

}  // namespace

TEST_SUITE("stable") {
  TEST_CASE("Laplace transform of the unit law") {
    for (double kappa : {0.3, 0.5, 0.8}) {
      const auto s = sample_positive_stable({kappa, 1.0}, 200000, 17);
      for (double lam : {0.5, 1.0, 2.0}) {
        double se = 0;
        const double m = laplace_mean(s, lam, &se);
        CAPTURE(kappa);
        CAPTURE(lam);
        CHECK(std::abs(m - std::exp(-std::pow(lam, kappa))) <= 3.0 * se);
      }
    }
  }

  TEST_CASE("scale parameter") {
    const StableSpec spec{0.5, 4.0};
    CHECK(laplace(spec, 1.0) == doctest::Approx(std::exp(-2.0)));
    const auto s = sample_positive_stable(spec, 200000, 5);
    double se = 0;
    const double m = laplace_mean(s, 0.25, &se);
    CHECK(std::abs(m - std::exp(-1.0)) <= 3.0 * se);
    const auto unit = sample_positive_stable({0.5, 1.0}, 1000, 5);
    const auto scaled = sample_positive_stable({0.5, 4.0}, 1000, 5);
    for (std::size_t i = 0; i < unit.size(); ++i) CHECK(scaled[i] == doctest::Approx(4.0 * unit[i]).epsilon(1e-14));
  }

  TEST_CASE("kappa = 1/2 median") {
    CHECK(levy_half_median() == doctest::Approx(oracle::kLevyHalfMedian).epsilon(1e-12));
    auto s = sample_positive_stable({0.5, 1.0}, 400001, 23);
    std::nth_element(s.begin(), s.begin() + 200000, s.end());
    const double med = s[200000];
    // SE of the median: 1 / (2 f(m) sqrt(n)), Levy density f at the median
    const double m = oracle::kLevyHalfMedian;
    const double f = std::exp(-1.0 / (4.0 * m)) / (2.0 * std::sqrt(std::numbers::pi) * std::pow(m, 1.5));
    CHECK(std::abs(med - m) <= 3.0 / (2.0 * f * std::sqrt(400001.0)));
  }

  TEST_CASE("samples are worker-count independent") {
    const auto a = sample_positive_stable({0.6, 1.0}, 150000, 2, 1);
    const auto b = sample_positive_stable({0.6, 1.0}, 150000, 2, 3);
    CHECK(a == b);
  }

  TEST_CASE("predicted tau CDF") {
    const auto p = limit_params_for(EnvironmentLaw::parse("beta:1.5,1.0"));
    const std::vector<double> grid = {1, 10, 100, 1000, 10000};
    const auto c = predicted_tau_cdf(p, grid, 100000, 4);
    for (std::size_t i = 1; i < c.cdf.size(); ++i) CHECK(c.cdf[i] >= c.cdf[i - 1]);
    CHECK(c.dkw_band == doctest::Approx(stats::dkw_epsilon(100000)));
    // kappa = 1/2: P{prefactor S <= x} = erfc(sqrt(prefactor / (4x)))
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(std::abs(c.cdf[i] - std::erfc(std::sqrt(p.tau_prefactor / (4.0 * grid[i])))) <= c.dkw_band);
  }

  TEST_CASE("inverse subordinator paths") {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(0.1 * i);
    const auto p = inverse_subordinator_path(0.5, 1.0, t, 1e-4, 3);
    CHECK(p.z_values[0] == 0.0);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(p.z_values[i] >= p.z_values[i - 1]);
    for (std::size_t i = 1; i < p.y_values.size(); ++i) CHECK(p.y_values[i] >= p.y_values[i - 1]);
  }

  TEST_CASE("self-similarity of the inverse subordinator") {
    const std::vector<double> t = {0.5, 1.0};
    std::vector<double> z1, z2;
    for (std::uint64_t s = 0; s < 4000; ++s) {
      const auto p = inverse_subordinator_path(0.5, 1.0, t, 1e-3, 100 + s);
      z1.push_back(std::pow(2.0, 0.5) * p.z_values[0]);
      z2.push_back(p.z_values[1]);
    }
    // z1 and z2 come from the same paths, so this is a loose band
    CHECK(stats::ks_two_sample(z1, z2) < 0.08);
  }

  TEST_CASE("independent increments") {
    // fixed early grid indices; a path shorter than that is vanishingly rare
    // and is dropped rather than clamped, which would couple the increments
    std::vector<double> a, b;
    const std::vector<double> t = {1.0, 2.0};
    const std::size_t k = 20;
    for (std::uint64_t s = 0; s < 3000; ++s) {
      const auto p = inverse_subordinator_path(0.5, 1.0, t, 1e-4, 900 + s);
      const auto& y = p.y_values;
      if (y.size() <= k) continue;
      a.push_back(std::log(y[k / 2] - y[0]));
      b.push_back(std::log(y[k] - y[k / 2]));
    }
    REQUIRE(a.size() >= 2990);
    const auto ma = stats::mean_se(a), mb = stats::mean_se(b);
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      cov += (a[i] - ma.mean) * (b[i] - mb.mean);
      va += (a[i] - ma.mean) * (a[i] - ma.mean);
      vb += (b[i] - mb.mean) * (b[i] - mb.mean);
    }
    const double r = cov / std::sqrt(va * vb);
    CHECK(std::abs(r) < 3.0 / std::sqrt(static_cast<double>(a.size())));
  }
}
