#include "rwre/special_functions.hpp"

#include <cmath>

#include "rwre/error.hpp"

namespace rwre {

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
  // glibc's lgamma is accurate to a few ulps on the positive axis.
  return std::lgamma(x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double z = 1.0 / (x * x);
  // Bernoulli tail: B_{2k} / (2k x^{2k}), k = 1..7
  const double tail =
      z * (1.0 / 12 -
           z * (1.0 / 120 -
                z * (1.0 / 252 - z * (1.0 / 240 - z * (1.0 / 132 - z * (691.0 / 32760 - z / 12))))));
  return shift + std::log(x) - 0.5 / x - tail;
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("log_beta: arguments must be positive");
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

}  // namespace rwre
