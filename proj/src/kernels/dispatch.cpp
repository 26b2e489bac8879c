#include "rwre/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace rwre::kernels {
namespace {

Isa detect() {
  if (const char* env = std::getenv("RWRE_KERNELS"); env && std::string_view(env) == "scalar")
    return Isa::scalar;
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) {
  if (isa == Isa::scalar) return true;
#ifdef RWRE_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  current().store(isa_available(isa) ? isa : Isa::scalar, std::memory_order_relaxed);
}

#ifdef RWRE_HAVE_AVX2_KERNELS
#define RWRE_DISPATCH(fn, ...) \
  return active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define RWRE_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

double sum_exp(std::span<const double> x, double shift) { RWRE_DISPATCH(sum_exp, x, shift); }

void log_rho(std::span<const double> omega, std::span<double> out) {
  RWRE_DISPATCH(log_rho, omega, out);
}

ExpSums laplace_sums(std::span<const double> x, double lambda) {
  RWRE_DISPATCH(laplace_sums, x, lambda);
}

std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol) {
  RWRE_DISPATCH(perpetuity_step, prod, total, rho, rel_tol);
}

std::size_t count_greater(std::span<const double> x, double threshold) {
  RWRE_DISPATCH(count_greater, x, threshold);
}

#undef RWRE_DISPATCH

}  // namespace rwre::kernels
