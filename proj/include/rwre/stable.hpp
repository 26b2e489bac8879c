#pragma once

// Positive stable laws with Laplace transform exp(-lambda^kappa), and the
// inverse of the kappa-stable subordinator.

#include <cstdint>
#include <vector>

#include "rwre/constants.hpp"
#include "rwre/rng.hpp"

namespace rwre {

struct StableSpec {
  double kappa = 0.5;
  double scale = 1.0;
};

// Kanter's representation: S = (A(U) / E)^{(1-kappa)/kappa} with
// A(u) = sin((1-kappa) pi u) sin(kappa pi u)^{kappa/(1-kappa)} / sin(pi u)^{1/(1-kappa)}.
double sample_positive_stable(const StableSpec& spec, CounterRng& rng);
std::vector<double> sample_positive_stable(const StableSpec& spec, std::uint64_t n, std::uint64_t seed,
                                           unsigned workers = 1);

// E[exp(-lambda scale S)] = exp(-(scale lambda)^kappa).
double laplace(const StableSpec& spec, double lambda);

// Median of the kappa = 1/2 law: S = 1/(2 Z^2), median 1/(2 q_{3/4}^2).
double levy_half_median();

struct PredictedCdf {
  std::vector<double> grid;
  std::vector<double> cdf;
  double dkw_band = 0.0;  // 95% half-width
  std::uint64_t samples = 0;
};

// Monte Carlo CDF of tau_prefactor * S_kappa on `grid`.
PredictedCdf predicted_tau_cdf(const LimitLawParams& params, const std::vector<double>& grid, std::uint64_t mc,
                               std::uint64_t seed);

struct SubordinatorPath {
  std::vector<double> times;     // query times t
  std::vector<double> y_grid;    // s_k = k dt
  std::vector<double> y_values;  // Y(s_k)
  std::vector<double> z_values;  // x_scale * Z(t)
  std::vector<long> z_index;     // k with Z(t) = s_k
  bool coarse = false;           // some Z(t) resolved to the first grid step
};

// Y(k dt) = sum of k increments dt^{1/kappa} S_i; Z(t) = inf{s : Y_s > t} read
// off the grid by right-continuous inversion; z_values scaled by x_scale.
SubordinatorPath inverse_subordinator_path(double kappa, double x_scale, const std::vector<double>& times, double dt,
                                           std::uint64_t seed);

}  // namespace rwre
