#include "rwre/stable.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/stats.hpp"

namespace rwre {
namespace {

void check_spec(const StableSpec& spec) {
  if (!(spec.kappa > 0.0 && spec.kappa < 1.0)) throw DomainError("stable: kappa must lie in (0,1)");
  if (!(spec.scale > 0.0)) throw DomainError("stable: scale must be positive");
}

}  // namespace

double sample_positive_stable(const StableSpec& spec, CounterRng& rng) {
  const double k = spec.kappa;
  const double u = rng.uniform();
  const double e = rng.exponential();
  const double pi = std::numbers::pi;
  const double log_a = std::log(std::sin((1.0 - k) * pi * u)) + k / (1.0 - k) * std::log(std::sin(k * pi * u)) -
                       1.0 / (1.0 - k) * std::log(std::sin(pi * u));
  return spec.scale * std::exp((1.0 - k) / k * (log_a - std::log(e)));
}

std::vector<double> sample_positive_stable(const StableSpec& spec, std::uint64_t n, std::uint64_t seed,
                                           unsigned workers) {
  check_spec(spec);
  constexpr std::size_t kBlock = 65536;
  std::vector<double> out(n);
  parallel_blocks(block_count(n, kBlock), workers, [&](std::size_t blk) {
    CounterRng rng(seed, {0x57AB, blk});
    const std::size_t end = std::min<std::size_t>(n, (blk + 1) * kBlock);
    for (std::size_t i = blk * kBlock; i < end; ++i) out[i] = sample_positive_stable(spec, rng);
  });
  return out;
}

double laplace(const StableSpec& spec, double lambda) {
  check_spec(spec);
  if (lambda < 0.0) throw DomainError("laplace: lambda must be >= 0");
  return std::exp(-std::pow(spec.scale * lambda, spec.kappa));
}

double levy_half_median() {
  const double q = stats::normal_quantile(0.75);
  return 1.0 / (2.0 * q * q);
}

PredictedCdf predicted_tau_cdf(const LimitLawParams& params, const std::vector<double>& grid, std::uint64_t mc,
                               std::uint64_t seed) {
  if (mc == 0) throw DomainError("predicted_tau_cdf: need samples");
  const auto s = sample_positive_stable({params.kappa, params.tau_prefactor}, mc, seed);
  PredictedCdf out;
  out.grid = grid;
  out.cdf = stats::empirical_cdf(s, grid);
  out.dkw_band = stats::dkw_epsilon(mc);
  out.samples = mc;
  return out;
}

SubordinatorPath inverse_subordinator_path(double kappa, double x_scale, const std::vector<double>& times, double dt,
                                           std::uint64_t seed) {
  check_spec({kappa, 1.0});
  if (!(dt > 0.0) || !(x_scale > 0.0)) throw DomainError("inverse_subordinator_path: dt and x_scale must be positive");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1]))
      throw DomainError("inverse_subordinator_path: times must be increasing and nonnegative");
  }
  SubordinatorPath p;
  p.times = times;
  CounterRng rng(seed, {0x5B0D});
  const StableSpec unit{kappa, std::pow(dt, 1.0 / kappa)};
  p.y_grid.push_back(0.0);
  p.y_values.push_back(0.0);
  const double t_max = times.empty() ? 0.0 : times.back();
  while (p.y_values.back() <= t_max) {
    p.y_values.push_back(p.y_values.back() + sample_positive_stable(unit, rng));
    p.y_grid.push_back(dt * static_cast<double>(p.y_grid.size()));
  }
  // Z(t) = first grid time with Y > t.
  std::size_t k = 0;
  for (double t : times) {
    if (t == 0.0) {  // Y_s > 0 for every s > 0, so Z(0) = 0 exactly
      p.z_index.push_back(0);
      p.z_values.push_back(0.0);
      continue;
    }
    while (p.y_values[k] <= t) ++k;
    p.z_index.push_back(static_cast<long>(k));
    p.z_values.push_back(x_scale * p.y_grid[k]);
    if (k == 1) p.coarse = true;
  }
  return p;
}

}  // namespace rwre
