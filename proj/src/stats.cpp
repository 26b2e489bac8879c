#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre::stats {

MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  if (x.empty()) return r;
  double s = 0.0;
  for (double v : x) s += v;
  r.mean = s / static_cast<double>(x.size());
  if (x.size() < 2) return r;
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
  return r;
}

HillEstimate hill(std::span<const double> x, std::size_t k) {
  std::vector<double> pos;
  pos.reserve(x.size());
  for (double v : x)
    if (v > 0.0 && std::isfinite(v)) pos.push_back(v);
  if (k < 1 || k >= pos.size()) throw DomainError("hill: need 1 <= k < number of positive samples");
  std::nth_element(pos.begin(), pos.begin() + static_cast<long>(k), pos.end(), std::greater<>());
  const double threshold = std::log(pos[k]);
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(pos[i]) - threshold;
  HillEstimate h;
  h.k = k;
  h.index = static_cast<double>(k) / s;
  h.se = h.index / std::sqrt(static_cast<double>(k));
  return h;
}

std::size_t default_hill_k(std::size_t n) {
  return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.6)));
}

std::vector<HillEstimate> hill_sweep(std::span<const double> x, std::size_t k, std::span<const double> factors) {
  std::vector<HillEstimate> out;
  for (double f : factors) {
    const auto kk = static_cast<std::size_t>(std::max(1.0, std::floor(static_cast<double>(k) * f)));
    out.push_back(hill(x, std::min(kk, x.size() - 1)));
  }
  return out;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw DomainError("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double dkw_epsilon(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0)) throw DomainError("dkw_epsilon: need n > 0 and alpha in (0,1)");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

std::vector<double> empirical_cdf(std::vector<double> sample, std::span<const double> grid) {
  std::sort(sample.begin(), sample.end());
  std::vector<double> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(sample.size());
  for (double g : grid) {
    const auto it = std::upper_bound(sample.begin(), sample.end(), g);
    out.push_back(sample.empty() ? 0.0 : static_cast<double>(it - sample.begin()) / n);
  }
  return out;
}

LinearFit weighted_least_squares(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares: need at least two points");
  const bool weighted = !sigma.empty();
  if (weighted && sigma.size() != x.size()) throw DomainError("least_squares: sigma size mismatch");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    sw += w;
    sx += w * x[i];
    sy += w * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    sxx += w * (x[i] - mx) * (x[i] - mx);
    sxy += w * (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("least_squares: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (weighted) {
    f.slope_se = std::sqrt(1.0 / sxx);
  } else if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
  }
  return f;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  return weighted_least_squares(x, y, {});
}

double bootstrap_se(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                    std::size_t resamples, std::uint64_t seed) {
  if (x.empty() || resamples < 2) throw DomainError("bootstrap_se: need data and at least two resamples");
  CounterRng rng(seed, {0xB007});
  std::vector<double> buf(x.size());
  std::vector<double> values;
  values.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& v : buf) v = x[static_cast<std::size_t>(rng.uniform() * static_cast<double>(x.size()))];
    values.push_back(stat(buf));
  }
  const MeanSe m = mean_se(values);
  return m.se * std::sqrt(static_cast<double>(values.size()));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p outside (0,1)");
  // Acklam's rational approximation, then two Newton steps on erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p > 1 - 0.02425) {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  for (int i = 0; i < 2; ++i) {
    const double e = normal_cdf(x) - p;
    x -= e * std::sqrt(2 * std::numbers::pi) * std::exp(0.5 * x * x);
  }
  return x;
}

}  // namespace rwre::stats
