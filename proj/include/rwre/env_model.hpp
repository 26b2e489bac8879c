#pragma once

// Laws of the i.i.d. environment, environment sampling, and the log-moment
// generating function Lambda(t) = log E[rho^t] with everything derived from it.

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rwre/rng.hpp"

namespace rwre {

struct BetaLaw {
  double alpha = 1.0;
  double beta = 1.0;
};

struct DiscreteLaw {
  std::vector<std::pair<double, double>> atoms;  // (omega, probability)
};

class EnvironmentLaw {
 public:
  static EnvironmentLaw beta(double alpha, double beta);
  static EnvironmentLaw discrete(std::vector<std::pair<double, double>> atoms);
  // "beta:A,B" or "discrete:w1@p1;w2@p2;..."
  static EnvironmentLaw parse(const std::string& text);

  std::string to_string() const;

  bool is_beta() const { return std::holds_alternative<BetaLaw>(kind_); }
  const BetaLaw& as_beta() const { return std::get<BetaLaw>(kind_); }
  const DiscreteLaw& as_discrete() const { return std::get<DiscreteLaw>(kind_); }

  // One draw of omega_0, strictly inside (0,1).
  double sample(CounterRng& rng) const;

  // E[log rho_0].
  double mean_log_rho() const;

  // Supremum of {t : E[rho^t] < inf} (infinity for discrete laws).
  double moment_bound() const;

 private:
  std::variant<BetaLaw, DiscreteLaw> kind_;
};

// rho = (1 - omega) / omega.
double rho(double omega);

// A realized window of the environment: omegas[i] = omega_{offset + i}.
struct EnvironmentSlice {
  long offset = 0;
  std::vector<double> omegas;
  std::uint64_t seed = 0;
  std::string law;

  long lo() const { return offset; }
  long hi() const { return offset + static_cast<long>(omegas.size()) - 1; }
  bool contains(long x) const { return x >= lo() && x <= hi(); }
  double at(long x) const { return omegas[static_cast<std::size_t>(x - offset)]; }
};

// Sites are grouped in fixed blocks, each drawn from its own stream keyed by
// (seed, block index), so any window of the same (law, seed) sees the same
// value at a given site.
inline constexpr long kEnvironmentBlock = 4096;

EnvironmentSlice sample_environment(const EnvironmentLaw& law, long lo, long hi, std::uint64_t seed);

// Grows `slice` in place so that it covers [lo, hi] (never shrinks).
void extend_environment(const EnvironmentLaw& law, EnvironmentSlice& slice, long lo, long hi);

// Lambda(t) = log E[rho_0^t]. Throws DomainError when the moment diverges.
double lambda_fn(const EnvironmentLaw& law, double t);
double lambda_derivative(const EnvironmentLaw& law, double t);

// Lambda(t) for a Beta law by tanh-sinh quadrature of the density, as an
// independent route to the closed form.
double lambda_quadrature(const EnvironmentLaw& law, double t);

enum class KappaMethod { closed_form, bisection_exact, bisection_quadrature, bisection_mc };

struct KappaResult {
  double kappa = 0.0;
  double residual = 0.0;  // |E[rho^kappa] - 1|
  KappaMethod method = KappaMethod::closed_form;
};

const char* kappa_method_name(KappaMethod m);

struct KappaOptions {
  double tol = 1e-12;
  bool allow_closed_form = true;
  bool use_quadrature = false;  // Beta only
  bool use_monte_carlo = false;
  std::uint64_t mc_draws = 1000000;
  std::uint64_t mc_seed = 1;
};

// Root of Lambda in (0,1). Throws RegimeError when there is none.
KappaResult kappa_solve(const EnvironmentLaw& law, const KappaOptions& opts = {});
inline KappaResult kappa_solve(const EnvironmentLaw& law, double tol) {
  KappaOptions o;
  o.tol = tol;
  return kappa_solve(law, o);
}

// E[rho^kappa log rho] = e^{Lambda(kappa)} Lambda'(kappa).
double moment_rho_log(const EnvironmentLaw& law, double kappa);

struct RateValue {
  double value = 0.0;
  bool infinite = false;    // value holds the sentinel
  bool below_mean = false;  // x < E[log rho], value is 0 by convention
};

inline constexpr double kInfiniteRate = 1e308;

// I(x) = sup_{t >= 0} (t x - Lambda(t)).
RateValue rate_function(const EnvironmentLaw& law, double x);

}  // namespace rwre
