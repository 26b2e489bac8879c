#pragma once

// Data-parallel inner loops used by the Monte Carlo estimators.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA implementation. The implementation is picked once at startup
// from the CPU's capabilities; RWRE_KERNELS=scalar in the environment (or
// force_isa) pins the scalar path. The arithmetic-only kernels are
// bit-identical across implementations; the exp/log kernels agree to a few
// ulps.

#include <cstddef>
#include <span>
#include <string_view>

namespace rwre::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();
void force_isa(Isa isa);

struct ExpSums {
  double sum = 0.0;     // sum_i exp(-lambda x_i)
  double sum_sq = 0.0;  // sum_i exp(-2 lambda x_i)
};

// sum_i exp(x_i - shift)
double sum_exp(std::span<const double> x, double shift);

// out_i = log(1 - omega_i) - log(omega_i); omega_i in (0,1). Written as a
// difference so that omega and 1 - omega give exactly opposite values.
void log_rho(std::span<const double> omega, std::span<double> out);

// First two empirical moments of exp(-lambda x) (unnormalised).
ExpSums laplace_sums(std::span<const double> x, double lambda);

// One step of a batch of truncated perpetuities sum_k rho_0 ... rho_k.
// For every live series (prod_i != 0): prod_i *= rho_i, total_i += prod_i, and
// the series is retired (prod_i = 0) once prod_i <= rel_tol * total_i.
// Returns the number of series still live.
std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol);

// Number of entries strictly greater than threshold.
std::size_t count_greater(std::span<const double> x, double threshold);

namespace scalar {
double sum_exp(std::span<const double> x, double shift);
void log_rho(std::span<const double> omega, std::span<double> out);
ExpSums laplace_sums(std::span<const double> x, double lambda);
std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol);
std::size_t count_greater(std::span<const double> x, double threshold);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define RWRE_HAVE_AVX2_KERNELS 1
namespace avx2 {
double sum_exp(std::span<const double> x, double shift);
void log_rho(std::span<const double> omega, std::span<double> out);
ExpSums laplace_sums(std::span<const double> x, double lambda);
std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol);
std::size_t count_greater(std::span<const double> x, double threshold);
}  // namespace avx2
#endif

}  // namespace rwre::kernels
