#pragma once

// Constants of the limit law: Iglehart (C_I), Feller (C_F), Kesten (C_K),
// the meander moment, the limit-law scales, and the Monte Carlo tail
// estimators behind them.

#include <cstdint>
#include <vector>

#include "rwre/env_model.hpp"

namespace rwre {

struct McOptions {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// Ladder excursions of the potential from 0: e_1, V(e_1) and the height
// H_0 = max_{0<=k<e_1} V(k).
struct ExcursionSample {
  std::vector<double> length;
  std::vector<double> end_value;
  std::vector<double> height;
  std::uint64_t flagged = 0;  // excursions cut at max_length (not in the vectors)
};

inline constexpr long kMaxExcursionLength = 100'000'000;

ExcursionSample sample_excursions(const EnvironmentLaw& law, const McOptions& mc,
                                  long max_length = kMaxExcursionLength);

struct IglehartEstimate {
  double c_i = 0.0;
  double c_i_se = 0.0;
  double e_kv = 0.0;  // E[e^{kappa V(e_1)}]
  double e_kv_se = 0.0;
  double mean_e1 = 0.0;
  double mean_e1_se = 0.0;
  double moment = 0.0;  // E[rho^kappa log rho]
  std::uint64_t n = 0;
  std::uint64_t flagged = 0;
};

// C_I = (1 - E[e^{kappa V(e_1)}])^2 / (kappa E[rho^kappa log rho] E[e_1]),
// with a delta-method standard error that accounts for the covariance of the
// two Monte Carlo means.
IglehartEstimate iglehart_from_sample(const ExcursionSample& s, double kappa, double moment);
IglehartEstimate iglehart_constant(const EnvironmentLaw& law, double kappa, const McOptions& mc);

// Empirical tail P{X >= h} on a grid, its scaled form e^{kappa h} P{X >= h},
// and the flat-region average of the scaled values.
struct TailCensus {
  std::vector<double> level_grid;
  std::vector<double> raw_tail;
  std::vector<double> scaled;
  std::vector<double> scaled_se;
  double constant_hat = 0.0;
  double constant_se = 0.0;
  std::uint64_t n = 0;
};

TailCensus exponential_tail_census(const std::vector<double>& sample, double kappa, const std::vector<double>& grid);

// S = max_{k>=0} V(k), simulated until V falls `gap` below the running max
// (the chance of a later new max is then about C_F e^{-kappa gap}).
std::vector<double> sample_supremum(const EnvironmentLaw& law, const McOptions& mc, double gap = 60.0);

// C_F = C_I / (1 - E[e^{kappa V(e_1)}]).
double feller_constant(double c_i, double e_kv);

// 1 / ((alpha - beta) B(alpha, beta)).
double kesten_constant_beta(double alpha, double beta);

struct KestenOptions {
  std::uint64_t n_series = 10000000;
  std::uint64_t max_terms = 100000;
  double rel_tol = 1e-12;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t grid_points = 16;
  std::size_t bootstrap = 200;
};

struct TailEstimate {
  std::vector<double> level_grid;
  std::vector<double> raw_tail;
  double constant_hat = 0.0;
  double index_hat = 0.0;
  double constant_se = 0.0;
  double index_se = 0.0;
  std::size_t hill_k = 0;
  std::uint64_t n = 0;
  std::uint64_t truncated = 0;  // series stopped at max_terms
};

// Perpetuities R = sum_{k>=0} rho_0 ... rho_k truncated once the increment
// falls below rel_tol of the partial sum.
std::vector<double> sample_perpetuities(const EnvironmentLaw& law, const KestenOptions& opts,
                                        std::uint64_t* truncated = nullptr);

// Fits P{R > x} ~ C_K x^{-kappa}: C_K by averaging x^kappa P{R > x} over a
// log grid from the 99.9th percentile to the last level with >= 200
// exceedances, the index by Hill with k = floor(N^0.6); standard errors by a
// bootstrap of the tail sample.
TailEstimate fit_power_tail(std::vector<double> sample, double kappa, const KestenOptions& opts);
TailEstimate kesten_tail_estimate(const EnvironmentLaw& law, double kappa, const KestenOptions& opts);

// E[M^kappa] = C_K / C_F and C_U = C_I E[M^kappa].
double meander_moment(double c_k, double c_f);
double c_u(double c_i, double m_moment);

struct LimitLawParams {
  double kappa = 0.0;
  double c_k = 0.0;
  double moment = 0.0;
  double lambda_scale = 0.0;   // 2^kappa (pi kappa^2 / sin(pi kappa)) C_K^2 E[rho^kappa log rho]
  double tau_prefactor = 0.0;  // lambda_scale^{1/kappa}
  double x_scale = 0.0;        // 1 / lambda_scale
};

LimitLawParams limit_scale(double kappa, double c_k, double moment);

// The Beta-law parameter written with digamma and the Beta function:
// 2^kappa (pi / sin(pi kappa)) (psi(alpha) - psi(beta)) / B(alpha, beta)^2.
double beta_lambda_scale(double alpha, double beta);

// Limit parameters for a law: closed forms for Beta, otherwise C_K must be
// supplied (e.g. from kesten_tail_estimate).
LimitLawParams limit_params_for(const EnvironmentLaw& law, double c_k_override = 0.0);

// P{H_0 >= h} by fixed-effort multilevel splitting: `particles` per stage,
// `batches` independent repetitions for the standard error.
struct SplittingEstimate {
  double q = 0.0;
  double se = 0.0;
  int levels = 0;
};

SplittingEstimate excursion_tail_splitting(const EnvironmentLaw& law, double kappa, double h, std::uint64_t particles,
                                           int batches, std::uint64_t seed);

// Optional diagnostic: Z = e^S M_1^+ M_2^+ of the single canonical valley,
// sampled by rejection on {H = S >= h} and {V(k) >= 0 for k <= 0}.
struct ZDiagnostic {
  std::vector<double> z;
  std::uint64_t tries = 0;
  double accept_rate = 0.0;
};

ZDiagnostic single_valley_z(const EnvironmentLaw& law, double h, double depth, std::uint64_t accepted,
                            std::uint64_t max_tries, std::uint64_t seed);

}  // namespace rwre
