#include "rwre/kernels.hpp"

#include <cmath>

namespace rwre::kernels::scalar {

double sum_exp(std::span<const double> x, double shift) {
  double s = 0.0;
  for (double v : x) s += std::exp(v - shift);
  return s;
}

void log_rho(std::span<const double> omega, std::span<double> out) {
  for (std::size_t i = 0; i < omega.size(); ++i) out[i] = std::log(1.0 - omega[i]) - std::log(omega[i]);
}

ExpSums laplace_sums(std::span<const double> x, double lambda) {
  ExpSums r;
  for (double v : x) {
    const double e = std::exp(-lambda * v);
    r.sum += e;
    r.sum_sq += e * e;
  }
  return r;
}

std::size_t perpetuity_step(std::span<double> prod, std::span<double> total,
                            std::span<const double> rho, double rel_tol) {
  std::size_t live = 0;
  for (std::size_t i = 0; i < prod.size(); ++i) {
    if (prod[i] == 0.0) continue;
    const double p = prod[i] * rho[i];
    const double t = total[i] + p;
    total[i] = t;
    prod[i] = (p <= rel_tol * t) ? 0.0 : p;
    live += prod[i] != 0.0;
  }
  return live;
}

std::size_t count_greater(std::span<const double> x, double threshold) {
  std::size_t n = 0;
  for (double v : x) n += v > threshold;
  return n;
}

}  // namespace rwre::kernels::scalar
