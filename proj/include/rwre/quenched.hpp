#pragma once

// Exact quenched computations on finite chains: exit probabilities,
// h-transformed potentials, moments of failed and successful crossing
// attempts, a tridiagonal linear-solve oracle, and walk samplers.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rwre/env_model.hpp"
#include "rwre/potential.hpp"

namespace rwre {

// Nearest-neighbour chain on [left, right]. omega[x - left] is the
// probability of a right step from x; at reflect_at it is forced to 1.
// v[x - left] is the potential, V(x) - V(x-1) = log rho_x.
struct QuenchedChain {
  long left = 0;
  long right = 0;
  std::vector<double> omega;
  std::optional<long> reflect_at;
  std::vector<double> v;

  double omega_at(long x) const;  // honours reflection
  double raw_omega(long x) const { return omega[static_cast<std::size_t>(x - left)]; }
  double V(long x) const { return v[static_cast<std::size_t>(x - left)]; }
  bool contains(long x) const { return x >= left && x <= right; }
};

// Potential built from the omegas with V(left) = v_left.
QuenchedChain make_chain(long left, std::vector<double> omegas, std::optional<long> reflect_at = std::nullopt,
                         double v_left = 0.0);

// Chain on [a, d] cut from a realized environment and its potential.
QuenchedChain chain_from_environment(const EnvironmentSlice& env, const PotentialPath& path, long a, long d,
                                     std::optional<long> reflect_at = std::nullopt);

// P^x{tau(r) < tau(l)} for the walk killed at l and r.
double exit_prob(const QuenchedChain& chain, long x, long l, long r);

struct FailureProb {
  double p = 0.0;              // probability that an excursion from b returns to b before d
  double one_minus_p = 0.0;    // omega_b e^{V(b)} / sum_{x=b}^{d-1} e^{V(x)}
};

FailureProb failure_prob(const QuenchedChain& chain, long b, long d);

enum class HKind { failure, success };

// Walk conditioned on returning to b before d (failure: h(x) = P^x{tau(b) < tau(d)})
// or on reaching d before b (success: g(x) = P^x{tau(d) < tau(b)}).
//
// Failure: omega_t[x] = omega_x h(x+1)/h(x) on [b, d-1], so omega_t(d-1) = 0,
// and v_t = V + L(b) - L with L(k) = log h(k) + log h(k+1), finite on [b, d-2].
// Success: omega_t[x] = omega_x g(x+1)/g(x) on [b+1, d-1] with g(d+1) := 1,
// so omega_t(b+1) = 1; v_t = V + M(b+1) - M with M(k) = log g(k) + log g(k+1),
// anchored at v_t(b+1) = V(b+1) and finite on [b+1, d].
// Undefined entries hold NaN (omegas) or +inf (potential).
struct HTransform {
  HKind kind = HKind::failure;
  long b = 0;
  long d = 0;
  std::vector<double> omega_t;     // sites b..d
  std::vector<double> v_t;         // sites b..d
  std::vector<double> correction;  // L (failure) or M (success), sites b..d
  std::vector<double> log_h;       // log h or log g, sites b..d
  double harmonic_residual = 0.0;  // max relative residual of the harmonic identity

  double omega_at(long x) const { return omega_t[static_cast<std::size_t>(x - b)]; }
  double v_at(long x) const { return v_t[static_cast<std::size_t>(x - b)]; }
  double corr_at(long x) const { return correction[static_cast<std::size_t>(x - b)]; }

  // Transformed increment v_t(y) - v_t(x), written as (V(y) - V(x)) plus the
  // signed correction so that the comparison with V(y) - V(x) is exact.
  double increment(const QuenchedChain& chain, long x, long y) const;
};

HTransform h_transform(const QuenchedChain& chain, long b, long d, HKind kind);

struct AttemptMoments {
  double p_fail = 0.0;
  double one_minus_p = 0.0;
  double mean_F = 0.0;
  double second_F = 0.0;
  double mean_G_exact = 0.0;
  double mean_G_bound = 0.0;
  double m1_hat = 0.0;
  double m2 = 0.0;
  long c = 0;  // first argmax of V on [b, d]
};

// Moments of one failed attempt F (an excursion from b back to b, conditioned
// on not hitting d, with reflection at a) and of the successful attempt G.
AttemptMoments attempt_moments(const QuenchedChain& chain, long a, long b, long d);

enum class OracleFunctional {
  hit_prob,                  // P^x{X_T = target}
  expected_time,             // E^x[T]
  second_moment,             // E^x[T^2]
  restricted_time,           // E^x[T 1{X_T = target}]
  restricted_second_moment,  // E^x[T^2 1{X_T = target}]
};

// Solves the first-step equations of the chain killed on `absorbing` by
// tridiagonal elimination in extended precision. Returns one value per site
// of the chain (absorbing sites get their boundary values). The left end must
// be absorbing or reflecting and the right end absorbing.
std::vector<double> linear_solve_oracle(const QuenchedChain& chain, const std::vector<long>& absorbing,
                                        OracleFunctional functional, long target = 0);

struct OracleAttempt {
  double p_fail = 0.0;
  double mean_F = 0.0;
  double second_F = 0.0;
  double mean_G = 0.0;
  double total_time = 0.0;  // E^b_{omega,|a}[tau(d)]
};

// The same attempt quantities assembled from linear_solve_oracle only.
OracleAttempt oracle_attempt(const QuenchedChain& chain, long a, long b, long d);

// ---- walk samplers -------------------------------------------------------

struct WalkStop {
  enum class Kind { hit_site, steps } kind = Kind::hit_site;
  long site = 0;
  std::uint64_t steps = 0;
  static WalkStop hit(long x) { return {Kind::hit_site, x, 0}; }
  static WalkStop after(std::uint64_t n) { return {Kind::steps, 0, n}; }
};

struct WalkResult {
  std::uint64_t tau = 0;  // steps taken
  long endpoint = 0;
  bool truncated = false;  // step cap reached before the stop condition
  std::vector<long> trace;
};

inline constexpr std::uint64_t kDefaultStepCap = 10'000'000'000ULL;

// Plain step-by-step walk. When `law` is given the environment window grows
// on demand; otherwise leaving it throws WindowExhausted.
WalkResult simulate_walk(EnvironmentSlice& env, long start, std::optional<long> reflect_at, WalkStop stop,
                         std::uint64_t seed, std::uint64_t step_cap = kDefaultStepCap, bool keep_trace = false,
                         const EnvironmentLaw* law = nullptr);

// Exact sample of tau(n) for the walk from 0 (unreflected) via the edge
// crossing counts: U_x left steps from x, U_x ~ NegBin(U_{x+1} + 1, omega_x)
// for 0 <= x < n and NegBin(U_{x+1}, omega_x) for x < 0; tau = n + 2 sum U.
// Grows the window to the left when needed (law required for that).
double sample_hitting_time(EnvironmentSlice& env, long n, CounterRng& rng, const EnvironmentLaw* law = nullptr);

// E^b_{omega,|a}[exp(-s tau(d))], exact. Uses psi_x = 1 - E^x[e^{-s tau(x+1)}]
// with psi_a = 1 - e^{-s} at the reflecting site; returns the log.
double quenched_log_laplace(const QuenchedChain& chain, long a, long b, long d, double s);

// Same for a raw omega window: reflection at env.lo(), from `from` to `to`.
double quenched_log_laplace(const EnvironmentSlice& env, long from, long to, double s);

// E^0_{omega,|0}[tau(m)] = sum_{x<m} sum_{0<=y<=x} (1/omega_y) e^{V(x)-V(y)}, omega_0 := 1.
double reflected_mean_hitting_time(const EnvironmentSlice& env, long m);

// Chain fixtures: "site omega" per line, '#' comments, "# reflect K".
void write_chain(std::ostream& out, const QuenchedChain& chain);
QuenchedChain load_chain(const std::string& file);

}  // namespace rwre
